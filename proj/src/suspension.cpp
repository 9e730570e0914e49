#include "shlab/suspension.hpp"

#include "shlab/numerics.hpp"
#include "shlab/parallel.hpp"
#include "shlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace shlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool defined_at(const BranchMap1D& f, double x) { return f.branch_of(x) && !f.is_singular(x); }

// Composite midpoint rule on [a, b] with about nodes_per_unit nodes per unit length.
template <class Fn>
double midpoint(Fn&& fn, double a, double b, int nodes_per_unit) {
  if (b <= a) return 0.0;
  const int m = std::max(1, static_cast<int>(std::ceil((b - a) * nodes_per_unit)));
  const double h = (b - a) / m;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += fn(a + (i + 0.5) * h);
  return s * h;
}

}  // namespace

RoofFunction constant_roof(double value) {
  require(value > 0, "roof must be positive");
  return {"constant", [value](double) { return value; }, value};
}

RoofFunction exit_time_roof(const GeometricLorenzSpec& spec) {
  spec.validate();
  const double l1 = spec.eigenvalues.lambda1, tt = spec.transit_time;
  return {"exit-time",
          [l1, tt](double x) {
            const double a = std::abs(x);
            return a == 0.0 ? kInf : exit_time(l1, std::min(a, 1.0)) + tt;
          },
          tt};
}

Suspension::Suspension(const BranchMap1D& base, RoofFunction roof)
    : base_(&base), roof_(std::move(roof)) {
  require(static_cast<bool>(roof_.tau), "roof evaluator missing");
  require(roof_.inf_tau > 0, "roof infimum must be positive");
}

SemiflowResult Suspension::flow(SuspensionPoint p, double t) const {
  require(t >= 0, "semiflow time must be nonnegative");
  SemiflowResult out;
  double x = p.x, s = p.s + t;
  double tau = roof_.tau(x);
  while (s >= tau) {
    s -= tau;
    if (!defined_at(*base_, x)) {
      out.point = {x, tau};
      out.terminated = true;
      out.remaining = s;
      return out;
    }
    x = (*base_)(x);
    ++out.roof_crossings;
    tau = roof_.tau(x);
  }
  out.point = {x, s};
  return out;
}

LiftedMeasure::LiftedMeasure(std::vector<double> base_samples, std::vector<double> weights,
                             const RoofFunction& roof, LiftOptions opt)
    : opt_(opt) {
  require(weights.empty() || weights.size() == base_samples.size(), "weights must match samples");
  require(opt.nodes_per_unit > 0 && opt.roof_cap > 0, "invalid lift options");
  double cut = 0.0, total = 0.0;
  for (std::size_t i = 0; i < base_samples.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    require(w >= 0, "weights must be nonnegative");
    const double tau = roof.tau(base_samples[i]);
    if (!std::isfinite(tau)) {
      ++excluded_;
      continue;
    }
    const double capped = std::min(tau, opt.roof_cap);
    cut += w * (tau - capped);
    total += w * tau;
    x_.push_back(base_samples[i]);
    w_.push_back(w);
    tau_.push_back(capped);
    wsum_ += w;
    mean_roof_ += w * capped;
  }
  require(wsum_ > 0, "no usable base samples");
  mean_roof_ /= wsum_;
  truncated_mass_ = total > 0 ? cut / total : 0.0;
}

namespace {

// Ratio estimator sum g_i / sum tau_i with a delta-method standard error.
Estimate ratio_estimate(const std::vector<double>& g, const std::vector<double>& w,
                        const std::vector<double>& tau, double wsum, double mean_roof) {
  CompensatedSum num;
  for (std::size_t i = 0; i < g.size(); ++i) num.add(w[i] * g[i]);
  Estimate e;
  e.samples = static_cast<long>(g.size());
  e.value = num.value() / (wsum * mean_roof);
  double var = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = w[i] * (g[i] - e.value * tau[i]);
    var += r * r;
  }
  e.stderr_ = std::sqrt(var) / (wsum * mean_roof);
  return e;
}

}  // namespace

Estimate LiftedMeasure::evaluate(const SuspensionObservable& phi) const {
  std::vector<double> g(x_.size());
  parallel_for(x_.size(), [&](std::size_t i) {
    const double x = x_[i];
    g[i] = midpoint([&](double s) { return phi(x, s); }, 0.0, tau_[i], opt_.nodes_per_unit);
  });
  return ratio_estimate(g, w_, tau_, wsum_, mean_roof_);
}

Estimate LiftedMeasure::evaluate_after(const Suspension& sus, const SuspensionObservable& phi,
                                       double t) const {
  std::vector<double> g(x_.size());
  parallel_for(x_.size(), [&](std::size_t i) {
    const double x = x_[i];
    g[i] = midpoint(
        [&](double s) {
          const auto r = sus.flow({x, s}, t);
          return r.terminated ? 0.0 : phi(r.point.x, r.point.s);
        },
        0.0, tau_[i], opt_.nodes_per_unit);
  });
  return ratio_estimate(g, w_, tau_, wsum_, mean_roof_);
}

LiftedMeasure lift_orbit_measure(const BranchMap1D& base, const RoofFunction& roof, double x0,
                                 std::size_t n, std::uint64_t seed, std::size_t burn,
                                 LiftOptions opt) {
  auto pts = orbit_points(base, x0, n + burn, seed);
  require(pts.size() == n + burn, "base orbit undefined before the sample was complete");
  pts.erase(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(burn));
  return LiftedMeasure(std::move(pts), {}, roof, opt);
}

double invariance_test(const LiftedMeasure& m, const Suspension& sus,
                       const std::vector<SuspensionObservable>& phis,
                       const std::vector<double>& ts) {
  double worst = 0.0;
  for (const auto& phi : phis) {
    const double base = m.evaluate(phi).value;
    for (double t : ts) {
      require(t >= 0, "invariance times must be nonnegative");
      if (t == 0.0) continue;  // X^0 is the identity
      worst = std::max(worst, std::abs(m.evaluate_after(sus, phi, t).value - base));
    }
  }
  return worst;
}

std::vector<SuspensionObservable> trig_observables(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SuspensionObservable> out;
  for (int k = 0; k < count; ++k) {
    const double a = 1 + std::floor(3 * uniform01(rng));
    const double b = std::floor(3 * uniform01(rng));
    const double c = 2 * std::numbers::pi * uniform01(rng);
    out.push_back([a, b, c](double x, double s) {
      return std::cos(2 * std::numbers::pi * (a * x + b * s) + c);
    });
  }
  return out;
}

namespace {

void finish_report(BracketReport& rep, int ratio_from, double resolution) {
  for (std::size_t n = 1; n < rep.brackets.size(); ++n) {
    if (static_cast<int>(n) < ratio_from) continue;
    const double prev = rep.brackets[n - 1].width();
    if (prev > resolution) rep.worst_ratio = std::max(rep.worst_ratio, rep.brackets[n].width() / prev);
  }
  if (rep.brackets.size() > 1) {
    const double w0 = rep.brackets.front().width(), wn = rep.brackets.back().width();
    rep.contraction_violation = w0 > resolution && wn >= w0;
  }
}

}  // namespace

BracketReport quotient_measure_bracket(const ReturnSystem& sys, int section,
                                       const std::vector<double>& base_samples,
                                       const std::function<double(const SectionPoint&)>& psi,
                                       int n_max, int leaf_samples, int ratio_from,
                                       double resolution) {
  require(n_max >= 0, "n_max must be nonnegative");
  require(leaf_samples >= 2, "leaves need at least two samples");
  const auto& sec = sys.sections().at(section);
  const std::size_t m = base_samples.size();
  // lo[n][i], hi[n][i]: inf and sup of psi o R^n over the leaf of sample i.
  std::vector<std::vector<double>> lo(n_max + 1, std::vector<double>(m, kInf)),
      hi(n_max + 1, std::vector<double>(m, -kInf));
  std::vector<long> dropped(m, 0);
  parallel_for(m, [&](std::size_t i) {
    const double v = sec.leaf_to_v(base_samples[i]);
    for (int j = 0; j < leaf_samples; ++j) {
      SectionPoint z{section, Vec2(static_cast<double>(j) / (leaf_samples - 1), v)};
      for (int n = 0; n <= n_max; ++n) {
        if (n > 0) {
          const auto r = sys.first_return(z);
          if (!r.ok()) {
            ++dropped[i];
            break;
          }
          z = r.image;
        }
        const double val = psi(z);
        lo[n][i] = std::min(lo[n][i], val);
        hi[n][i] = std::max(hi[n][i], val);
      }
    }
  });
  BracketReport rep;
  for (long d : dropped) rep.undefined += d;
  for (int n = 0; n <= n_max; ++n) {
    CompensatedSum a, b;
    long used = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!std::isfinite(lo[n][i])) continue;
      a.add(lo[n][i]);
      b.add(hi[n][i]);
      ++used;
    }
    require(used > 0, "every leaf sample hit the singular set");
    rep.brackets.push_back({n, a.value() / used, b.value() / used});
  }
  finish_report(rep, ratio_from, resolution);
  return rep;
}

BracketReport quotient_measure_bracket(const BranchMap1D& f, const std::vector<double>& base_samples,
                                       const std::function<double(double)>& psi, int n_max) {
  require(n_max >= 0, "n_max must be nonnegative");
  BracketReport rep;
  std::vector<double> x = base_samples;
  std::vector<bool> alive(x.size(), true);
  for (int n = 0; n <= n_max; ++n) {
    CompensatedSum s;
    long used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!alive[i]) continue;
      s.add(psi(x[i]));
      ++used;
    }
    require(used > 0, "every sample hit the singular set");
    rep.brackets.push_back({n, s.value() / used, s.value() / used});
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!alive[i]) continue;
      if (!defined_at(f, x[i])) {
        alive[i] = false;
        ++rep.undefined;
        continue;
      }
      x[i] = f(x[i]);
    }
  }
  finish_report(rep, 1, 0.0);
  return rep;
}

TimeAverage flow_time_average(const Suspension& sus, SuspensionPoint p, const SuspensionObservable& phi,
                              double T, std::uint64_t seed, int nodes_per_unit) {
  require(T > 0, "averaging time must be positive");
  Orbit1D orb(sus.base(), p.x, seed);
  TimeAverage out;
  CompensatedSum integral;
  double s0 = p.s, left = T;
  while (left > 0) {
    if (!orb.defined()) {
      out.terminated = true;
      break;
    }
    const double x = orb.value();
    const double tau = sus.roof().tau(x);
    const double end = std::min(tau, s0 + left);
    integral.add(midpoint([&](double s) { return phi(x, s); }, s0, end, nodes_per_unit));
    left -= end - s0;
    s0 = 0.0;
    if (left > 0 && !orb.step()) {
      out.terminated = true;
      break;
    }
  }
  out.time = T - std::max(left, 0.0);
  out.value = out.time > 0 ? integral.value() / out.time : 0.0;
  return out;
}

TimeAverageEstimate flow_time_average_batched(const Suspension& sus, SuspensionPoint p,
                                              const SuspensionObservable& phi, double T,
                                              std::uint64_t seed, int batches) {
  require(batches >= 2, "need at least two batches");
  // One orbit split into consecutive batches of flow time T / batches.
  Orbit1D orb(sus.base(), p.x, seed);
  const double L = T / batches;
  std::vector<double> means;
  TimeAverageEstimate out;
  double s0 = p.s;
  for (int b = 0; b < batches && !out.terminated; ++b) {
    CompensatedSum integral;
    double left = L;
    while (left > 0) {
      if (!orb.defined()) {
        out.terminated = true;
        break;
      }
      const double x = orb.value();
      const double tau = sus.roof().tau(x);
      const double end = std::min(tau, s0 + left);
      integral.add(midpoint([&](double s) { return phi(x, s); }, s0, end, 64));
      left -= end - s0;
      s0 = end;
      if (left > 0) {
        s0 = 0.0;
        if (!orb.step()) out.terminated = true;
      }
    }
    if (!out.terminated) means.push_back(integral.value() / L);
  }
  if (means.size() < 2) return out;
  out.value = mean(means);
  out.stderr_ = stddev(means) / std::sqrt(static_cast<double>(means.size()));
  return out;
}

TransferReport ergodicity_transfer(const Suspension& sus, const SuspensionObservable& phi,
                                   int starts, double T, std::uint64_t seed) {
  require(starts >= 2, "need at least two starting points");
  TransferReport rep;
  rep.averages.resize(starts);
  const auto& d = sus.base().domain();
  parallel_for(static_cast<std::size_t>(starts), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    double x = d.lo + d.length() * uniform01(rng);
    rep.averages[i] = flow_time_average_batched(sus, {x, 0.0}, phi, T, derive_seed(seed + 1, i));
  });
  for (int i = 0; i < starts; ++i)
    for (int j = i + 1; j < starts; ++j) {
      const auto &a = rep.averages[i], &b = rep.averages[j];
      const double se = std::hypot(a.stderr_, b.stderr_);
      const double z = se > 0 ? std::abs(a.value - b.value) / se : 0.0;
      rep.worst_z = std::max(rep.worst_z, z);
      ++rep.pairs;
      if (z > 3) ++rep.pairs_above_3;
    }
  return rep;
}

void write_evaluations_csv(std::ostream& os, const std::vector<EvaluationRow>& rows) {
  os << "observable_id,estimate,stderr,n_samples\n";
  for (const auto& r : rows)
    os << r.id << ',' << fmt_double(r.estimate.value) << ',' << fmt_double(r.estimate.stderr_)
       << ',' << r.estimate.samples << '\n';
}

}  // namespace shlab
