#include "shlab/section.hpp"

#include "shlab/numerics.hpp"
#include "shlab/ode.hpp"
#include "shlab/parallel.hpp"
#include "shlab/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace shlab {

namespace {

constexpr double kStartSkip = 1e-8;  // crossings this close to t = 0 are the start point

Mat2 metric_factor(const CrossSection& s) {
  Mat2 g;
  g << s.eu().dot(s.eu()), s.eu().dot(s.ev()), s.ev().dot(s.eu()), s.ev().dot(s.ev());
  return g.llt().matrixU();
}

}  // namespace

const char* to_string(ReturnStatus s) {
  switch (s) {
    case ReturnStatus::ok: return "ok";
    case ReturnStatus::stable_manifold: return "stable_manifold";
    case ReturnStatus::no_return: return "no_return";
  }
  return "?";
}

CrossSection::CrossSection(Vec3 origin, Vec3 eu, Vec3 ev, int orientation, double delta,
                           Interval leaf_interval)
    : origin_(origin),
      eu_(eu),
      ev_(ev),
      orientation_(orientation),
      delta_(delta),
      leaf_interval_(leaf_interval) {
  const Vec3 n = eu.cross(ev);
  require(n.norm() > 1e-12 * eu.norm() * ev.norm(), "section chart axes must not be parallel");
  require(orientation == 1 || orientation == -1, "section orientation must be +1 or -1");
  require(delta >= 0, "adaptedness margin must be nonnegative");
  require(leaf_interval.length() > 0, "leaf interval must be nondegenerate");
  normal_ = n.normalized();
  Mat2 g;
  g << eu.dot(eu), eu.dot(ev), ev.dot(eu), ev.dot(ev);
  gram_inv_ = g.inverse();
}

Vec3 CrossSection::chart(const Vec2& uv) const {
  return origin_ + (uv[0] - 0.5) * eu_ + (uv[1] - 0.5) * ev_;
}

Vec2 CrossSection::coordinates(const Vec3& x) const {
  const Vec3 d = x - origin_;
  const Vec2 ab = gram_inv_ * Vec2(eu_.dot(d), ev_.dot(d));
  return ab + Vec2(0.5, 0.5);
}

bool CrossSection::covers(const Vec2& uv, double slack) const {
  return uv[0] >= -slack && uv[0] <= 1 + slack && uv[1] >= -slack && uv[1] <= 1 + slack;
}

// --- smooth flows -----------------------------------------------------------

FlowReturnSystem::FlowReturnSystem(FlowSystem system, std::vector<CrossSection> sections,
                                   ReturnOptions opt)
    : ReturnSystem(opt), system_(std::move(system)), sections_(std::move(sections)) {
  require(!sections_.empty(), "return system needs at least one section");
  require(opt.t_max > 0 && opt.tol > 0 && opt.event_tol > 0, "invalid return options");
}

ReturnSample FlowReturnSystem::first_return(const SectionPoint& z, double t_min) const {
  ReturnSample out;
  out.source = z;
  const Vec3 x0 = point(z);
  Dopri5<3>::Options o;
  o.tol = opt_.tol;
  Dopri5<3> ode([this](const Vec3& y) { return system_.rhs(y); }, x0, 0.0, o);
  std::vector<double> g(sections_.size());
  for (std::size_t k = 0; k < sections_.size(); ++k)
    g[k] = sections_[k].orientation() * sections_[k].level(x0);
  const auto& ball = system_.trapping();
  double last_hit = 0.0;
  try {
    for (;;) {
      ode.step(last_hit + opt_.t_max);
      const Vec3 y = ode.state();
      double best_t = std::numeric_limits<double>::infinity();
      int best_k = -1;
      Vec2 best_uv;
      for (std::size_t k = 0; k < sections_.size(); ++k) {
        const auto& s = sections_[k];
        const double g1 = s.orientation() * s.level(y);
        if (g[k] < 0.0 && g1 >= 0.0) {
          double lo = ode.step_start(), hi = ode.time();
          while (hi - lo > opt_.event_tol) {
            const double mid = 0.5 * (lo + hi);
            if (s.orientation() * s.level(ode.dense(mid)) < 0.0)
              lo = mid;
            else
              hi = mid;
          }
          const double tc = 0.5 * (lo + hi);
          const Vec2 uv = s.coordinates(ode.dense(tc));
          if (tc > kStartSkip && tc < best_t && s.covers(uv)) {
            best_t = tc;
            best_k = static_cast<int>(k);
            best_uv = uv;
          }
        }
        g[k] = g1;
      }
      if (best_k >= 0) {
        ++out.crossings;
        last_hit = best_t;
        if (best_t >= t_min) {
          out.image = {best_k, best_uv};
          out.tau = best_t;
          return out;
        }
      }
      if (ode.time() >= last_hit + opt_.t_max) {
        out.status = ReturnStatus::no_return;
        out.tau = ode.time();
        return out;
      }
      if (system_.rhs(y).norm() < opt_.stall_speed) {
        out.status = ReturnStatus::stable_manifold;
        out.tau = ode.time();
        return out;
      }
      if (ball && !ball->contains(y)) {
        out.status = ReturnStatus::no_return;
        out.tau = ode.time();
        return out;
      }
    }
  } catch (const DivergenceError& e) {
    out.status = ReturnStatus::no_return;
    out.tau = e.last_valid_time();
  }
  return out;
}

// --- geometric model ----------------------------------------------------------

GeometricLorenzFlow::GeometricLorenzFlow(GeometricLorenzSpec spec, ReturnOptions opt)
    : ReturnSystem(opt), spec_(spec), saddle_(lorenz_like_saddle(spec.eigenvalues)) {
  spec_.validate();
  // Ingoing section {x3 = 1}: u -> x2, v -> x1, both on [-1, 1].
  sections_.emplace_back(Vec3(0, 0, 1), Vec3(0, 2, 0), Vec3(2, 0, 0), 1, 0.25,
                         Interval{-1.0, 1.0});
}

GeometricLorenzFlow::Leg GeometricLorenzFlow::run_box(
    const Vec3& x0, const std::function<void(double, const Vec3&)>* observer, double t_offset,
    double dt, double t_end) const {
  Leg leg;
  if (std::abs(x0[0]) >= 1.0) {
    leg.exit = x0;
    leg.exit[0] = std::copysign(1.0, x0[0]);
    return leg;
  }
  Dopri5<3>::Options o;
  o.tol = opt_.tol;
  Dopri5<3> ode([this](const Vec3& y) { return saddle_.rhs(y); }, x0, 0.0, o);
  // Next sample index on the global grid k * dt.
  long k = observer ? static_cast<long>(std::ceil(t_offset / dt - 1e-12)) : 0;
  auto emit = [&](double upto) {
    if (!observer) return;
    while (k * dt <= upto + t_offset && k * dt <= t_end) {
      (*observer)(k * dt, ode.dense(k * dt - t_offset));
      ++k;
    }
  };
  const double horizon = observer ? std::min(opt_.t_max, t_end - t_offset) : opt_.t_max;
  for (;;) {
    ode.step(horizon);
    const Vec3 y = ode.state();
    if (std::abs(y[0]) >= 1.0) {
      double lo = ode.step_start(), hi = ode.time();
      while (hi - lo > opt_.event_tol) {
        const double mid = 0.5 * (lo + hi);
        if (std::abs(ode.dense(mid)[0]) < 1.0)
          lo = mid;
        else
          hi = mid;
      }
      leg.box_time = 0.5 * (lo + hi);
      emit(leg.box_time);
      leg.exit = ode.dense(leg.box_time);
      leg.exit[0] = std::copysign(1.0, y[0]);
      return leg;
    }
    emit(ode.time());
    if (ode.time() >= horizon) {
      leg.box_time = ode.time();
      // Running out of the sampling window is not a Gamma signal.
      leg.status = observer && t_end - t_offset < opt_.t_max ? ReturnStatus::ok
                                                               : ReturnStatus::no_return;
      leg.exit = y;
      return leg;
    }
    if (saddle_.rhs(y).norm() < opt_.stall_speed) {
      leg.status = ReturnStatus::stable_manifold;
      leg.box_time = ode.time();
      leg.exit = y;
      return leg;
    }
  }
}

Vec2 GeometricLorenzFlow::transit(const Vec3& exit) const {
  const double s = exit[0] > 0 ? 1.0 : -1.0;
  const double x1 = s * (spec_.mu * exit[2] - 1.0);
  const double x2 = s * spec_.fold_offset + spec_.leaf_gain * exit[1];
  return {0.5 * (x2 + 1.0), 0.5 * (x1 + 1.0)};
}

ReturnSample GeometricLorenzFlow::first_return(const SectionPoint& z, double t_min) const {
  require(z.section == 0, "geometric Lorenz flow has a single section");
  ReturnSample out;
  out.source = z;
  Vec3 x = point(z);
  double t = 0.0;
  for (;;) {
    const Leg leg = run_box(x, nullptr, 0.0, 0.0, 0.0);
    if (leg.status != ReturnStatus::ok) {
      out.status = leg.status;
      out.tau = t + leg.box_time;
      return out;
    }
    t += leg.box_time + spec_.transit_time;
    ++out.crossings;
    const Vec2 uv = transit(leg.exit);
    if (t >= t_min) {
      out.image = {0, uv};
      out.tau = t;
      return out;
    }
    x = sections_[0].chart(uv);
  }
}

void GeometricLorenzFlow::sample_box(const SectionPoint& z, double T, double dt,
                                     const std::function<void(double, const Vec3&)>& observer) const {
  require(T > 0 && dt > 0, "sampling needs T > 0 and dt > 0");
  Vec3 x = point(z);
  double t = 0.0;
  while (t < T) {
    const Leg leg = run_box(x, &observer, t, dt, T);
    if (leg.status != ReturnStatus::ok) return;
    t += leg.box_time;
    if (t >= T) return;
    t += spec_.transit_time;
    x = sections_[0].chart(transit(leg.exit));
  }
}

// --- orbit utilities ------------------------------------------------------------

std::vector<SectionPoint> attractor_hits(const ReturnSystem& system, const SectionPoint& z0, int n,
                                         int burn) {
  require(n >= 0 && burn >= 0, "hit counts must be nonnegative");
  std::vector<SectionPoint> out;
  out.reserve(n);
  SectionPoint z = z0;
  for (int i = 0; i < burn + n; ++i) {
    const auto s = system.first_return(z);
    if (!s.ok())
      throw NumericalError(std::string("attractor orbit lost: ") + to_string(s.status));
    z = s.image;
    if (i >= burn) out.push_back(z);
  }
  return out;
}

SectionCheck check_section(const ReturnSystem& system, int section, int grid,
                           const std::vector<SectionPoint>& hits, bool transversal_on_hits) {
  require(grid >= 2, "section grid needs at least 2 points per side");
  const auto& s = system.sections().at(section);
  SectionCheck out;
  std::vector<Vec3> pts;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      pts.push_back(s.chart(Vec2(double(i) / (grid - 1), double(j) / (grid - 1))));
  out.min_image_distance = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b)
      out.min_image_distance = std::min(out.min_image_distance, (pts[a] - pts[b]).norm());
  out.injective = out.min_image_distance > 0.0;

  auto transversality = [&](const Vec3& x) {
    const Vec3 f = system.field(x);
    return std::abs(f.dot(s.normal())) / f.norm();
  };
  out.min_transversality = std::numeric_limits<double>::infinity();
  if (transversal_on_hits) {
    for (const auto& h : hits)
      if (h.section == section) out.min_transversality = std::min(out.min_transversality, transversality(s.chart(h.uv)));
  } else {
    for (const auto& p : pts) out.min_transversality = std::min(out.min_transversality, transversality(p));
  }
  out.transverse = out.min_transversality > 0.1;

  out.adaptedness = std::numeric_limits<double>::infinity();
  for (const auto& h : hits)
    if (h.section == section)
      out.adaptedness = std::min(out.adaptedness, std::min(h.uv[0], 1.0 - h.uv[0]) * s.eu().norm());
  out.adapted = out.adaptedness > s.delta();
  return out;
}

std::optional<Mat2> return_jacobian(const ReturnSystem& system, const SectionPoint& z, double h0) {
  const auto base = system.first_return(z);
  if (!base.ok()) return std::nullopt;
  auto image = [&](const Vec2& uv) -> std::optional<Vec2> {
    const auto s = system.first_return({z.section, uv});
    if (!s.ok() || s.image.section != base.image.section) return std::nullopt;
    return s.image.uv;
  };
  auto central = [&](double h) -> std::optional<Mat2> {
    Mat2 j;
    for (int c = 0; c < 2; ++c) {
      Vec2 e = Vec2::Zero();
      e[c] = h;
      const auto p = image(z.uv + e), m = image(z.uv - e);
      if (!p || !m) return std::nullopt;
      j.col(c) = (*p - *m) / (2 * h);
    }
    return j;
  };
  for (double h = h0; h >= 1e-10; h *= 0.25) {
    const auto a = central(h), b = central(0.5 * h);
    if (!a || !b) continue;
    if ((*a - *b).norm() <= 1e-3 * std::max(1.0, b->norm())) return b;
  }
  return std::nullopt;
}

namespace {

// Follows next-hit returns until stop(elapsed, count) holds.
template <class Stop>
CompositeReturn chain_returns(const ReturnSystem& system, const SectionPoint& z, bool with_jac,
                              Stop stop) {
  CompositeReturn out;
  out.sample.source = z;
  out.path.push_back(z);
  out.jacobian_ok = with_jac;
  SectionPoint cur = z;
  double t = 0.0;
  for (;;) {
    const auto s = system.first_return(cur);
    if (!s.ok()) {
      out.sample.status = s.status;
      out.sample.tau = t + s.tau;
      out.jacobian_ok = false;
      return out;
    }
    if (with_jac && out.jacobian_ok) {
      const auto j = return_jacobian(system, cur);
      if (j)
        out.jacobian = *j * out.jacobian;
      else
        out.jacobian_ok = false;
    }
    t += s.tau;
    out.sample.crossings += s.crossings;
    cur = s.image;
    out.path.push_back(cur);
    if (stop(t, static_cast<int>(out.path.size()) - 1)) break;
  }
  out.sample.image = cur;
  out.sample.tau = t;
  return out;
}

}  // namespace

CompositeReturn composite_return(const ReturnSystem& system, const SectionPoint& z, double t_min,
                                 bool with_jacobian) {
  return chain_returns(system, z, with_jacobian, [&](double t, int) { return t >= t_min; });
}

StableDirection estimate_stable_direction(const ReturnSystem& system, const SectionPoint& z,
                                          int n_iters) {
  require(n_iters >= 2, "stable direction needs at least two returns");
  Mat2 j = Mat2::Identity();
  SectionPoint cur = z;
  int done = 0;
  for (; done < n_iters; ++done) {
    const auto s = system.first_return(cur);
    if (!s.ok()) break;
    const auto dj = return_jacobian(system, cur);
    if (!dj) break;
    j = *dj * j;
    cur = s.image;
  }
  if (done < 2) throw NumericalError("insufficient returns for a stable direction estimate");
  const auto& src = system.sections().at(z.section);
  const auto& dst = system.sections().at(cur.section);
  const Mat2 ls = metric_factor(src), ld = metric_factor(dst);
  const Mat2 m = ld * j * ls.inverse();
  Eigen::JacobiSVD<Mat2> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec2 d = ls.inverse() * svd.matrixV().col(1);
  d.normalize();
  if (std::abs(d[0]) >= std::abs(d[1]) ? d[0] < 0 : d[1] < 0) d = -d;
  StableDirection out;
  out.direction = d;
  out.contraction = svd.singularValues()[1];
  out.returns = done;
  return out;
}

LeafContraction leaf_contraction(const ReturnSystem& system, const std::vector<SectionPoint>& hits,
                                 int pairs, double spread, std::uint64_t seed) {
  require(!hits.empty() && pairs > 0, "leaf contraction needs hits and pairs");
  std::vector<double> ratio(pairs, -1.0);
  parallel_for(static_cast<std::size_t>(pairs), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const SectionPoint y = hits[i % hits.size()];
    double du = spread * (2 * uniform01(rng) - 1);
    if (std::abs(du) < 1e-6) du = 1e-6;
    SectionPoint z = y;
    z.uv[0] = std::clamp(y.uv[0] + du, 0.0, 1.0);
    if (z.uv[0] == y.uv[0]) return;
    const auto ry = system.first_return(y), rz = system.first_return(z);
    if (!ry.ok() || !rz.ok() || ry.image.section != rz.image.section) return;
    const double d0 = (system.point(y) - system.point(z)).norm();
    const double d1 = (system.point(ry.image) - system.point(rz.image)).norm();
    ratio[i] = d1 / d0;
  });
  LeafContraction out;
  double sum = 0.0;
  for (double r : ratio) {
    if (r < 0) {
      ++out.rejected;
      continue;
    }
    ++out.pairs;
    sum += r;
    out.max_ratio = std::max(out.max_ratio, r);
  }
  out.mean_ratio = out.pairs ? sum / out.pairs : 0.0;
  return out;
}

ConeReport cone_check(const ReturnSystem& system, const ConeOptions& opt) {
  require(opt.rho > 0 && opt.rho < 1, "cone width rho must lie in (0, 1)");
  require(opt.samples > 0, "cone check needs samples");
  Rng rng(opt.seed);
  const SectionPoint start{0, Vec2(0.1 + 0.8 * uniform01(rng), 0.1 + 0.8 * uniform01(rng))};
  const auto bases = attractor_hits(system, start, opt.samples, opt.burn);

  struct Out {
    double width = -1, expansion = 0;
    int vectors = 0;
  };
  std::vector<Out> res(bases.size());
  parallel_for(bases.size(), [&](std::size_t i) {
    const auto cr = composite_return(system, bases[i], opt.t2, true);
    if (!cr.sample.ok() || !cr.jacobian_ok) return;
    Rng r(derive_seed(opt.seed, i));
    const auto& src = system.sections()[bases[i].section];
    const auto& dst = system.sections()[cr.sample.image.section];
    const double scale = src.ev().norm() / src.eu().norm();
    const double edge = (i % 2 ? 1.0 : -1.0) * opt.rho * scale;
    const Vec2 vs[2] = {Vec2(opt.rho * scale * (2 * uniform01(r) - 1), 1.0), Vec2(edge, 1.0)};
    Out o;
    o.width = 0.0;
    o.expansion = std::numeric_limits<double>::infinity();
    for (const auto& w : vs) {
      const Vec2 img = cr.jacobian * w;
      const double width = std::abs(img[0]) * dst.eu().norm() / (std::abs(img[1]) * dst.ev().norm());
      const double expansion = dst.push(img).norm() / src.push(w).norm();
      o.width = std::max(o.width, width);
      o.expansion = std::min(o.expansion, expansion);
      ++o.vectors;
    }
    res[i] = o;
  });
  ConeReport rep;
  rep.rho = opt.rho;
  rep.t2 = opt.t2;
  rep.min_expansion = std::numeric_limits<double>::infinity();
  for (const auto& o : res) {
    if (o.width < 0) {
      ++rep.rejected;
      continue;
    }
    rep.vectors += o.vectors;
    rep.max_width = std::max(rep.max_width, o.width);
    rep.min_expansion = std::min(rep.min_expansion, o.expansion);
  }
  if (rep.vectors == 0) rep.min_expansion = 0.0;
  return rep;
}

ConeCalibration calibrate_t2(const ReturnSystem& system, const ConeOptions& base,
                             const std::vector<double>& candidates, double lambda) {
  require(lambda > 0 && lambda < 1, "lambda must lie in (0, 1)");
  ConeCalibration out;
  out.lambda = lambda;
  const double need = (5.0 / 6.0) / lambda;
  for (double t2 : candidates) {
    ConeOptions o = base;
    o.t2 = t2;
    const auto rep = cone_check(system, o);
    out.reports.push_back(rep);
    if (rep.vectors > 0 && rep.max_width <= 0.5 * rep.rho && rep.min_expansion >= need) {
      out.found = true;
      out.t2 = t2;
      break;
    }
  }
  return out;
}

double expansion_rate(const std::vector<ConeReport>& reports) {
  require(reports.size() >= 2, "expansion rate needs at least two reports");
  std::vector<double> t, y;
  for (const auto& r : reports) {
    require(r.min_expansion > 0, "expansion rate needs positive expansions");
    t.push_back(r.t2);
    y.push_back(std::log(r.min_expansion));
  }
  return linear_fit(t, y).first;
}

PeriodicOrbit refine_periodic_orbit(const ReturnSystem& system, const SectionPoint& guess,
                                    int returns, double tol, int max_iter) {
  require(returns >= 1, "periodic orbit needs at least one return");
  auto eval = [&](const SectionPoint& z, bool jac) {
    return chain_returns(system, z, jac, [&](double, int k) { return k >= returns; });
  };
  PeriodicOrbit out;
  SectionPoint z = guess;
  auto cr = eval(z, true);
  auto residual = [&](const CompositeReturn& c) {
    return c.sample.ok() && c.sample.image.section == z.section
               ? (c.sample.image.uv - z.uv).norm()
               : std::numeric_limits<double>::infinity();
  };
  double res = residual(cr);
  for (out.iterations = 0; out.iterations < max_iter && res > tol; ++out.iterations) {
    if (!cr.jacobian_ok || !std::isfinite(res)) break;
    const Vec2 f = cr.sample.image.uv - z.uv;
    const Vec2 step = (cr.jacobian - Mat2::Identity()).fullPivLu().solve(-f);
    double a = 1.0;
    bool moved = false;
    for (int k = 0; k < 12; ++k, a *= 0.5) {
      SectionPoint trial{z.section, z.uv + a * step};
      auto c = eval(trial, false);
      const double r = c.sample.ok() && c.sample.image.section == z.section
                           ? (c.sample.image.uv - trial.uv).norm()
                           : std::numeric_limits<double>::infinity();
      if (r < res) {
        z = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    cr = eval(z, true);
    res = residual(cr);
  }
  out.point = z;
  out.period = cr.sample.tau;
  out.returns = returns;
  out.residual = res;
  out.converged = res <= tol;
  return out;
}

ReturnTimeStats mean_return_time(const ReturnSystem& system, int samples, std::uint64_t seed) {
  require(samples > 1, "return-time statistics need at least two samples");
  const int nsec = static_cast<int>(system.sections().size());
  std::vector<double> tau(samples, -1.0);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const int s = static_cast<int>(rng() % static_cast<std::uint64_t>(nsec));
    const Vec2 uv(uniform01(rng), uniform01(rng));
    const auto r = system.first_return({s, uv});
    if (r.ok()) tau[i] = r.tau;
  });
  ReturnTimeStats out;
  std::vector<double> good;
  for (double t : tau) {
    if (t < 0)
      ++out.holes;
    else
      good.push_back(t);
  }
  out.samples = static_cast<int>(good.size());
  if (out.samples > 1) {
    out.mean = mean(good);
    out.stderr_ = stddev(good) / std::sqrt(static_cast<double>(out.samples));
  }
  return out;
}

// --- Lorenz sections ---------------------------------------------------------------

namespace {

struct PlaneFit {
  Vec3 center;
  Vec3 along;   // unit, along the hit curve
  Vec3 across;  // unit, in-plane, perpendicular
};

PlaneFit fit_hits(const std::vector<Vec3>& hits, double z) {
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (const auto& h : hits) m += h.head<2>();
  m /= static_cast<double>(hits.size());
  Mat2 c = Mat2::Zero();
  for (const auto& h : hits) {
    const Vec2 d = h.head<2>() - m;
    c += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat2> es(c);
  const Vec2 a = es.eigenvectors().col(1);
  return {Vec3(m[0], m[1], z), Vec3(a[0], a[1], 0), Vec3(-a[1], a[0], 0)};
}

// Chart spanned by (w, a) covering the hits with margins.
CrossSection chart_for(const std::vector<Vec3>& hits, const Vec3& center, const Vec3& w,
                       const Vec3& a, Interval leaf) {
  Mat2 basis;
  basis << w[0], a[0], w[1], a[1];
  const Mat2 inv = basis.inverse();
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (const auto& h : hits) {
    const Vec2 c = inv * (h - center).head<2>();
    amin = std::min(amin, c[0]);
    amax = std::max(amax, c[0]);
    bmin = std::min(bmin, c[1]);
    bmax = std::max(bmax, c[1]);
  }
  const double lv = 1.3 * (bmax - bmin);
  const double lu = std::max(3.0 * (amax - amin), 1e-3 * lv);
  const Vec3 origin = center + 0.5 * (amin + amax) * w + 0.5 * (bmin + bmax) * a;
  const Vec3 eu = lu * w, ev = lv * a;
  const int orientation = eu.cross(ev)[2] < 0 ? 1 : -1;  // count downward crossings
  return CrossSection(origin, eu, ev, orientation, 0.2 * lu, leaf);
}

}  // namespace

std::vector<CrossSection> lorenz_sections(const FlowSystem& lorenz, double tol) {
  const double zc = lorenz.param("r") - 1.0;
  // Hits lie on two parallel segments, one per wing. A hit belongs to the wing
  // the orbit was circling at the preceding maximum of z.
  std::vector<Vec3> plus, minus;
  Dopri5<3>::Options o;
  o.tol = tol;
  Dopri5<3> ode([&](const Vec3& y) { return lorenz.rhs(y); },
                flow_to(lorenz, Vec3(1, 1, 1), 50.0, tol), 0.0, o);
  double g0 = ode.state()[2] - zc;
  double zdot0 = lorenz.rhs(ode.state())[2];
  int wing = 0;
  while (ode.time() < 400.0) {
    ode.step(400.0);
    const double g1 = ode.state()[2] - zc;
    const double zdot1 = lorenz.rhs(ode.state())[2];
    if (zdot0 > 0 && zdot1 <= 0) wing = ode.state()[0] > 0 ? 1 : -1;
    zdot0 = zdot1;
    if (g0 > 0 && g1 <= 0 && wing != 0) {
      double lo = ode.step_start(), hi = ode.time();
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (ode.dense(mid)[2] - zc > 0 ? lo : hi) = mid;
      }
      (wing > 0 ? plus : minus).push_back(ode.dense(0.5 * (lo + hi)));
    }
    g0 = g1;
  }
  require(plus.size() > 20 && minus.size() > 20, "too few Lorenz section hits");

  const std::vector<Interval> leaves{{0.0, 1.0}, {-1.0, 0.0}};
  const std::vector<Vec3>* groups[2] = {&plus, &minus};
  std::vector<CrossSection> prelim;
  std::vector<PlaneFit> fits;
  for (int s = 0; s < 2; ++s) {
    fits.push_back(fit_hits(*groups[s], zc));
    prelim.push_back(chart_for(*groups[s], fits[s].center, fits[s].across, fits[s].along, leaves[s]));
  }
  FlowReturnSystem pre(lorenz, prelim, ReturnOptions{tol, 50.0, 1e-10, 1e-8});
  std::vector<CrossSection> out;
  for (int s = 0; s < 2; ++s) {
    // Hit closest to the centroid.
    const auto& g = *groups[s];
    const auto it = std::min_element(g.begin(), g.end(), [&](const Vec3& a, const Vec3& b) {
      return (a - fits[s].center).norm() < (b - fits[s].center).norm();
    });
    const SectionPoint z{s, prelim[s].coordinates(*it)};
    const auto sd = estimate_stable_direction(pre, z, 4);
    Vec3 w = prelim[s].push(sd.direction);
    w[2] = 0.0;
    w.normalize();
    out.push_back(chart_for(g, fits[s].center, w, fits[s].along, leaves[s]));
  }
  return out;
}

}  // namespace shlab
