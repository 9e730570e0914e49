#include "shlab/ergodic.hpp"

#include "shlab/numerics.hpp"
#include "shlab/parallel.hpp"
#include "shlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

namespace shlab {

double EmpiricalMeasure::integrate(const std::function<double(const Vec3&)>& phi) const {
  CompensatedSum s;
  for (std::size_t i = 0; i < points.size(); ++i) s.add(weights[i] * phi(points[i]));
  return s.value();
}

EmpiricalMeasure empirical_measure(const FlowSystem& flow, const Vec3& x0, double T, double dt,
                                   double transient, std::uint64_t seed) {
  require(T > 0 && dt > 0, "empirical measure needs positive T and dt");
  EmpiricalMeasure m;
  m.seed = seed;
  m.T = T;
  m.dt = dt;
  const Vec3 start = transient > 0 ? flow_to(flow, x0, transient) : x0;
  sample_orbit(flow, start, T, dt, [&](double, const Vec3& x) { m.points.push_back(x); });
  m.weights.assign(m.points.size(), 1.0 / static_cast<double>(m.points.size()));
  return m;
}

std::vector<Vec3> uniform_seeds(const FlowSystem& flow, int n, std::uint64_t seed, const Box3& box) {
  require(n >= 0, "seed count must be nonnegative");
  Rng rng(seed);
  std::vector<Vec3> out;
  const auto& tb = flow.trapping();
  Vec3 lo = box.lo, hi = box.hi;
  if (tb) {
    lo = tb->center - Vec3::Constant(tb->radius);
    hi = tb->center + Vec3::Constant(tb->radius);
  }
  require((hi - lo).minCoeff() > 0, "seed region is empty");
  while (static_cast<int>(out.size()) < n) {
    Vec3 x;
    for (int k = 0; k < 3; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * uniform01(rng);
    if (!tb || tb->contains(x)) out.push_back(x);
  }
  return out;
}

namespace {

struct SeedRun {
  bool escaped = false;
  // sums[k][j]: running integral of observable j up to checkpoint k (ascending time).
  std::vector<std::vector<double>> sums;
  std::vector<double> lo, hi;
};

// Disjoint-set forest.
int find_root(std::vector<int>& p, int i) {
  while (p[i] != i) i = p[i] = p[p[i]];
  return i;
}

}  // namespace

BirkhoffReport birkhoff_uniqueness(const FlowSystem& flow, const std::vector<Observable>& obs,
                                   int seeds, double T, std::uint64_t seed,
                                   const BirkhoffOptions& opt) {
  require(seeds >= 2, "need at least two seeds");
  require(T > 0 && opt.dt > 0, "invalid averaging window");
  require(opt.checkpoints >= 1, "need at least one checkpoint");
  const auto starts = uniform_seeds(flow, seeds, seed, opt.box);
  const std::size_t J = obs.size();
  std::vector<double> marks;  // checkpoint times after the transient, ascending
  for (int k = opt.checkpoints - 1; k >= 0; --k) marks.push_back(T / std::ldexp(1.0, k));

  std::vector<SeedRun> runs(seeds);
  parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t i) {
    SeedRun& r = runs[i];
    r.sums.assign(marks.size(), std::vector<double>(J, 0.0));
    r.lo.assign(J, std::numeric_limits<double>::infinity());
    r.hi.assign(J, -std::numeric_limits<double>::infinity());
    std::vector<CompensatedSum> acc(J);
    std::size_t next = 0;
    const auto& tb = flow.trapping();
    try {
      sample_orbit(
          flow, starts[i], opt.transient + T, opt.dt,
          [&](double t, const Vec3& x) {
            if (tb && !tb->contains(x)) throw EscapeError("seed escaped", t);
            if (t < opt.transient) return;
            const double s = t - opt.transient;
            while (next < marks.size() && s > marks[next] + 0.5 * opt.dt) {
              for (std::size_t j = 0; j < J; ++j) r.sums[next][j] = acc[j].value();
              ++next;
            }
            for (std::size_t j = 0; j < J; ++j) {
              const double v = obs[j].fn(x);
              acc[j].add(v * opt.dt);
              r.lo[j] = std::min(r.lo[j], v);
              r.hi[j] = std::max(r.hi[j], v);
            }
          },
          opt.tol);
      for (; next < marks.size(); ++next)
        for (std::size_t j = 0; j < J; ++j) r.sums[next][j] = acc[j].value();
    } catch (const NumericalError&) {
      r.escaped = true;
    }
  });

  BirkhoffReport rep;
  std::vector<int> kept;
  for (int i = 0; i < seeds; ++i) {
    if (runs[i].escaped)
      ++rep.escaped;
    else
      kept.push_back(i);
  }
  rep.seeds = static_cast<int>(kept.size());
  require(rep.seeds >= 1, "every seed escaped");

  for (std::size_t j = 0; j < J; ++j) {
    ObservableSummary s;
    s.name = obs[j].name;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i : kept) {
      lo = std::min(lo, runs[i].lo[j]);
      hi = std::max(hi, runs[i].hi[j]);
    }
    s.range = hi - lo;
    std::vector<double> lt, ls;
    for (std::size_t k = 0; k < marks.size(); ++k) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (int i : kept) {
        const double a = runs[i].sums[k][j] / marks[k];
        mn = std::min(mn, a);
        mx = std::max(mx, a);
      }
      s.spread_history.push_back({marks[k], mx - mn});
      if (mx - mn > 0) {
        lt.push_back(std::log(marks[k]));
        ls.push_back(std::log(mx - mn));
      }
    }
    if (lt.size() >= 2) s.rate = linear_fit(lt, ls).first;
    for (int i : kept) s.averages.push_back(runs[i].sums.back()[j] / T);
    s.mean = mean(s.averages);
    s.spread = s.spread_history.back().second;
    rep.observables.push_back(std::move(s));
  }

  // Single-linkage clusters: seeds agree when every observable is within the threshold.
  const int n = rep.seeds;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool close = true;
      for (const auto& s : rep.observables)
        if (std::abs(s.averages[a] - s.averages[b]) > opt.cluster_fraction * s.range) close = false;
      if (close) parent[find_root(parent, a)] = find_root(parent, b);
    }
  std::vector<int> label(n, -1), size;
  rep.cluster_of.resize(n);
  for (int a = 0; a < n; ++a) {
    const int r = find_root(parent, a);
    if (label[r] < 0) {
      label[r] = static_cast<int>(size.size());
      size.push_back(0);
    }
    rep.cluster_of[a] = label[r];
    ++size[label[r]];
  }
  rep.clusters = static_cast<int>(size.size());
  rep.largest_cluster_fraction =
      static_cast<double>(*std::max_element(size.begin(), size.end())) / n;
  return rep;
}

FlowSystem double_well_rotation() {
  auto rhs = [](const Vec3& v) {
    const double x = v[0], y = v[1], z = v[2], q = 1 - y * y - z * z;
    return Vec3(x - x * x * x, y * q - z, z * q + y);
  };
  auto jac = [](const Vec3& v) {
    const double x = v[0], y = v[1], z = v[2], q = 1 - y * y - z * z;
    Mat3 j;
    j << 1 - 3 * x * x, 0, 0, 0, q - 2 * y * y, -2 * y * z - 1, 0, -2 * y * z + 1, q - 2 * z * z;
    return j;
  };
  return FlowSystem("double-well-rotation", {}, rhs, jac,
                    {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(-1, 0, 0)});
}

FlowSystem linear_test_flow(double a, double b) {
  require(a > 0 && b > 0, "linear test flow rates must be positive");
  auto rhs = [a, b](const Vec3& v) { return Vec3(a * v[0], 1.0, -b * v[2]); };
  auto jac = [a, b](const Vec3&) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = a;
    j(2, 2) = -b;
    return j;
  };
  return FlowSystem("linear-test", {{"a", a}, {"b", b}}, rhs, jac, {});
}

FlowSystem periodic_toy_flow() {
  // Cycle radius 0.8 keeps the orbit off the lines of a half-unit grid.
  auto rhs = [](const Vec3& v) {
    const double y = v[1], z = v[2], q = 0.64 - y * y - z * z;
    return Vec3(0.25 - v[0], y * q - z, z * q + y);
  };
  auto jac = [](const Vec3& v) {
    const double y = v[1], z = v[2], q = 0.64 - y * y - z * z;
    Mat3 j;
    j << -1, 0, 0, 0, q - 2 * y * y, -2 * y * z - 1, 0, -2 * y * z + 1, q - 2 * z * z;
    return j;
  };
  return FlowSystem("periodic-toy", {}, rhs, jac, {Vec3(0.25, 0, 0)});
}

SpectrumReport spectrum_structure(const FlowSystem& flow, const std::vector<Vec3>& seeds, double T,
                                  double zero_tol, const LyapunovOptions& opt) {
  require(!seeds.empty(), "need at least one seed");
  SpectrumReport rep;
  rep.records.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    const auto r = qr_lyapunov(flow, seeds[i], T, opt);
    auto& rec = rep.records[i];
    rec.seed_point = seeds[i];
    rec.exponents = r.exponents;
    rec.mean_divergence = r.mean_divergence;
    const auto& e = r.exponents;
    rec.structure_ok = e[0] > 0 && e[2] < 0 && std::abs(e[1]) < zero_tol && e[0] + e[1] > 0;
    const double sum = e[0] + e[1] + e[2];
    rec.divergence_gap = std::abs(sum - r.mean_divergence) / std::max(1e-300, std::abs(r.mean_divergence));
  });
  rep.all_ok = true;
  for (const auto& r : rep.records) {
    rep.all_ok = rep.all_ok && r.structure_ok;
    rep.worst_zero_exponent = std::max(rep.worst_zero_exponent, std::abs(r.exponents[1]));
    rep.worst_divergence_gap = std::max(rep.worst_divergence_gap, r.divergence_gap);
  }
  return rep;
}

EntropyReport entropy_formula_check(const FlowSystem& flow, const std::vector<Vec3>& seeds, double T,
                                    double transient, double tol) {
  require(!seeds.empty(), "need at least one seed");
  EntropyReport rep;
  rep.records.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    CompensatedSum normal, area, along;
    std::vector<double> residual;
    long steps = 0;
    const auto r = tangent_walk(
        flow, seeds[i], T, 1.0, transient,
        [&](const TangentStep& st) {
          const Vec3 X = flow.rhs(st.x);
          const double nx = X.norm();
          const Vec3 Xh = X / nx;
          const Vec3 X1 = st.jac * X;  // DX_1 X = X o X_1
          const Vec3 X1h = X1.normalized();
          // Unstable direction: top QR vector with the flow component removed.
          Vec3 u = st.frame.col(0);
          residual.push_back(std::abs(u.dot(Xh)));
          u -= u.dot(Xh) * Xh;
          u.normalize();
          Vec3 w = st.jac * u;
          w -= w.dot(X1h) * X1h;
          normal.add(std::log(w.norm()));
          // E^cu as the top QR 2-plane.
          const Vec3 q0 = st.frame.col(0), q1 = st.frame.col(1);
          area.add(std::log((st.jac * q0).cross(st.jac * q1).norm() / q0.cross(q1).norm()));
          along.add(std::log(X1.norm() / nx));
          ++steps;
        },
        tol);
    auto& rec = rep.records[i];
    rec.qr = r.exponents[0];
    rec.unstable = normal.value() / steps;
    rec.cu_det = (area.value() - along.value()) / steps;
    rec.quality = median(residual);
    const double vals[3] = {rec.qr, rec.unstable, rec.cu_det};
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        rec.max_rel_dev = std::max(rec.max_rel_dev,
                                   std::abs(vals[a] - vals[b]) / std::max(std::abs(vals[a]), std::abs(vals[b])));
  });
  for (const auto& r : rep.records) rep.worst_rel_dev = std::max(rep.worst_rel_dev, r.max_rel_dev);
  return rep;
}

AbramovReport abramov_check(const GeometricLorenzFlow& g, long returns, std::uint64_t seed) {
  require(returns >= 100, "Abramov check needs at least 100 returns");
  AbramovReport rep;
  rep.returns = returns;
  const auto f = geometric_lorenz_map(g.spec());
  Rng rng(seed);
  const double x0 = -1 + 2 * uniform01(rng);

  const auto xs = orbit_points(f, x0, static_cast<std::size_t>(returns) + 100, seed);
  require(static_cast<long>(xs.size()) == returns + 100, "quotient orbit hit the singular set");
  CompensatedSum lm;
  for (std::size_t k = 100; k < xs.size(); ++k) lm.add(std::log(std::abs(f.derivative(xs[k]))));
  rep.map_exponent = lm.value() / static_cast<double>(returns);

  // Flow side: tangent vector pushed by return Jacobians, time from return times.
  const auto& sec = g.sections()[0];
  SectionPoint z{0, Vec2(0.5 * (1 + 0.2 * (uniform01(rng) - 0.5)), sec.leaf_to_v(x0))};
  for (int k = 0; k < 100; ++k) z = g.first_return(z).image;
  Vec2 v(0.3, 1.0);
  v.normalize();
  CompensatedSum lg, tau;
  long done = 0;
  while (done < returns) {
    const auto r = g.first_return(z);
    const auto J = return_jacobian(g, z);
    if (!r.ok() || !J) {
      // Gamma hit (probability zero): nudge along the leaf coordinate.
      z.uv[1] += 1e-9;
      continue;
    }
    v = *J * v;
    const double n = v.norm();
    lg.add(std::log(n));
    v /= n;
    tau.add(r.tau);
    z = r.image;
    ++done;
  }
  rep.flow_exponent = lg.value() / tau.value();
  rep.mean_return_time = tau.value() / static_cast<double>(returns);
  rep.rel_dev = std::abs(rep.flow_exponent * rep.mean_return_time - rep.map_exponent) /
                std::abs(rep.map_exponent);
  return rep;
}

double DensityProfile::max_density() const {
  double m = 0.0;
  for (const auto& b : bands)
    for (double d : b.density) m = std::max(m, d);
  return m;
}

double DensityProfile::median_density() const {
  std::vector<double> v;
  for (const auto& b : bands)
    for (std::size_t k = 0; k < b.density.size(); ++k)
      if (b.counts[k] > 0) v.push_back(b.density[k]);
  return v.empty() ? 0.0 : median(v);
}

double DensityProfile::density_near_singularity(double radius) const {
  double s = 0.0;
  int n = 0;
  for (const auto& b : bands)
    for (std::size_t k = 0; k < b.density.size(); ++k)
      if (b.distance[k] < radius) {
        s += b.density[k];
        ++n;
      }
  return n ? s / n : 0.0;
}

DensityProfile density_from_samples(const std::vector<std::array<double, 2>>& samples,
                                    Interval a_range, Interval b_range, int bands, int bins,
                                    const std::function<double(double, double)>& distance,
                                    int strip) {
  require(bands >= 1 && bins >= 1, "need at least one band and bin");
  require(a_range.length() > 0 && b_range.length() > 0, "empty profile range");
  DensityProfile p;
  p.strip = strip;
  p.cu_range = a_range;
  const double ha = a_range.length() / bins, hb = b_range.length() / bands;
  p.bands.resize(bands);
  for (int j = 0; j < bands; ++j) {
    auto& b = p.bands[j];
    b.band_lo = b_range.lo + j * hb;
    b.band_hi = b.band_lo + hb;
    b.counts.assign(bins, 0);
    b.density.assign(bins, 0.0);
    b.distance.resize(bins);
    for (int k = 0; k < bins; ++k)
      b.distance[k] = distance(a_range.lo + (k + 0.5) * ha, b.band_lo + 0.5 * hb);
  }
  for (const auto& s : samples) {
    if (s[0] < a_range.lo || s[0] >= a_range.hi || s[1] < b_range.lo || s[1] >= b_range.hi) continue;
    const int k = std::min(bins - 1, static_cast<int>((s[0] - a_range.lo) / ha));
    const int j = std::min(bands - 1, static_cast<int>((s[1] - b_range.lo) / hb));
    ++p.bands[j].counts[k];
    ++p.samples;
  }
  if (p.samples == 0) throw NumericalError("profile undersampled: no samples in range");
  const double cell = ha * hb;
  for (auto& b : p.bands)
    for (int k = 0; k < bins; ++k) b.density[k] = b.counts[k] / (p.samples * cell);
  return p;
}

ProfileReport unstable_density_profile(const GeometricLorenzFlow& g, double T, int bands, int bins,
                                       double near_radius, std::uint64_t seed, double dt) {
  require(T > 0, "profile time must be positive");
  Rng rng(seed);
  SectionPoint z{0, Vec2(0.5 + 0.1 * (uniform01(rng) - 0.5), 0.3 + 0.4 * uniform01(rng))};
  for (int k = 0; k < 50; ++k) {
    const auto r = g.first_return(z);
    require(r.ok(), "profile seed fell on the stable manifold");
    z = r.image;
  }
  // Strip 0: orbits that entered with x2 < 0, strip 1: x2 > 0.
  std::vector<std::array<double, 2>> pts[2];
  g.sample_box(z, T, dt, [&](double, const Vec3& x) {
    pts[x[1] > 0 ? 1 : 0].push_back({x[0], x[2]});
  });
  const auto dist = [](double a, double b) { return std::hypot(a, b); };
  ProfileReport rep;
  for (int s = 0; s < 2; ++s) {
    if (pts[s].size() < 10000) throw NumericalError("profile undersampled: fewer than 1e4 box samples");
    rep.coarse.push_back(density_from_samples(pts[s], {-1, 1}, {0, 1}, bands, bins, dist, s));
    rep.fine.push_back(density_from_samples(pts[s], {-1, 1}, {0, 1}, bands, 2 * bins, dist, s));
  }
  std::vector<double> med;
  double near = 0.0;
  for (int s = 0; s < 2; ++s) {
    rep.sup_coarse = std::max(rep.sup_coarse, rep.coarse[s].max_density());
    rep.sup_fine = std::max(rep.sup_fine, rep.fine[s].max_density());
    med.push_back(rep.coarse[s].median_density());
    near = std::max(near, rep.coarse[s].density_near_singularity(near_radius));
  }
  rep.median_density = mean(med);
  rep.near_density = near;
  rep.refinement_ratio = rep.sup_fine / rep.sup_coarse;
  rep.bounded = std::abs(rep.refinement_ratio - 1.0) <= 0.25;
  rep.decays = rep.near_density < 0.5 * rep.median_density;
  return rep;
}

CoverageReport support_coverage(const FlowSystem& flow, const Vec3& x0, double T, double h,
                                int union_orbits, std::uint64_t seed, double dt, int checkpoints) {
  require(h > 0 && T > 0, "coverage needs positive h and T");
  using Cell = std::tuple<long, long, long>;
  auto cell = [h](const Vec3& x) {
    return Cell{static_cast<long>(std::floor(x[0] / h)), static_cast<long>(std::floor(x[1] / h)),
                static_cast<long>(std::floor(x[2] / h))};
  };
  const double transient = 20.0;
  // Union proxy for the attractor from independent seeds.
  std::set<Cell> uni;
  Box3 box{x0 - Vec3::Constant(1.0), x0 + Vec3::Constant(1.0)};
  const auto starts = uniform_seeds(flow, union_orbits, seed, box);
  for (const auto& s : starts) {
    const Vec3 y = flow_to(flow, s, transient);
    sample_orbit(flow, y, T, dt, [&](double, const Vec3& x) { uni.insert(cell(x)); });
  }
  std::set<Cell> mine;
  std::vector<double> marks;
  for (int k = checkpoints - 1; k >= 0; --k) marks.push_back(T / std::ldexp(1.0, k));
  std::vector<std::set<Cell>::size_type> seen;
  std::size_t next = 0;
  const Vec3 y0 = flow_to(flow, x0, transient);
  sample_orbit(flow, y0, T, dt, [&](double t, const Vec3& x) {
    while (next < marks.size() && t > marks[next] + 0.5 * dt) {
      seen.push_back(mine.size());
      ++next;
    }
    if (uni.count(cell(x))) mine.insert(cell(x));
  });
  while (seen.size() < marks.size()) seen.push_back(mine.size());
  CoverageReport rep;
  rep.cells_union = static_cast<long>(uni.size());
  rep.cells_orbit = static_cast<long>(mine.size());
  rep.fraction = static_cast<double>(mine.size()) / static_cast<double>(uni.size());
  for (std::size_t k = 0; k < marks.size(); ++k)
    rep.history.push_back({marks[k], static_cast<double>(seen[k]) / static_cast<double>(uni.size())});
  return rep;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& rep) {
  os << "seed_x,seed_y,seed_z,lambda_plus,lambda_zero,lambda_minus,mean_divergence,structure_ok\n";
  for (const auto& r : rep.records)
    os << fmt_double(r.seed_point[0]) << ',' << fmt_double(r.seed_point[1]) << ','
       << fmt_double(r.seed_point[2]) << ',' << fmt_double(r.exponents[0]) << ','
       << fmt_double(r.exponents[1]) << ',' << fmt_double(r.exponents[2]) << ','
       << fmt_double(r.mean_divergence) << ',' << (r.structure_ok ? 1 : 0) << '\n';
}

void write_profile_csv(std::ostream& os, const std::vector<DensityProfile>& profiles) {
  os << "strip,band_lo,band_hi,bin,cu_lo,cu_hi,distance,count,density\n";
  for (const auto& p : profiles) {
    for (const auto& b : p.bands) {
      const double h = p.cu_range.length() / static_cast<double>(b.density.size());
      for (std::size_t k = 0; k < b.density.size(); ++k)
        os << p.strip << ',' << fmt_double(b.band_lo) << ',' << fmt_double(b.band_hi) << ',' << k
           << ',' << fmt_double(p.cu_range.lo + k * h) << ',' << fmt_double(p.cu_range.lo + (k + 1) * h)
           << ',' << fmt_double(b.distance[k]) << ',' << b.counts[k] << ',' << fmt_double(b.density[k])
           << '\n';
    }
  }
}

}  // namespace shlab
