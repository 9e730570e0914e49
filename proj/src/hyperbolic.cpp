#include "shlab/hyperbolic.hpp"

#include "shlab/numerics.hpp"
#include "shlab/parallel.hpp"
#include "shlab/rng.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace shlab {

using Quad = boost::multiprecision::cpp_bin_float_quad;

void HTParams::validate(const BranchMap1D& map) const {
  require(b > 0 && c > 0 && delta > 0, "hyperbolic-time parameters must be positive");
  if (enforce_b_below_c4) require(b < c / 4, "hyperbolic-time parameters need b < c/4");
  require(delta < 0.5 * map.shortest_branch(), "delta must be below half the shortest branch");
}

namespace {

// Orbit x_0..x_{n-1}; empty optional when it hits Gamma0 or leaves the domain.
std::optional<std::vector<double>> orbit(const BranchMap1D& map, double x, long n,
                                         std::uint64_t seed) {
  auto pts = orbit_points(map, x, static_cast<std::size_t>(n), seed);
  if (static_cast<long>(pts.size()) < n) return std::nullopt;
  for (double v : pts)
    if (map.is_singular(v) || !map.branch_of(v)) return std::nullopt;
  return pts;
}

template <class Real>
HTCheck tail_check(const BranchMap1D& map, const std::vector<double>& pts, long n,
                   const HTParams& p) {
  using std::log;
  using boost::multiprecision::log;
  HTCheck out;
  Real a = 0, b = 0;
  Real ma = std::numeric_limits<double>::infinity(), mb = std::numeric_limits<double>::infinity();
  for (long j = n - 1; j >= 0; --j) {
    const double xj = pts[j];
    a += log(Real(std::abs(map.derivative(xj)))) - Real(p.c);
    b += log(Real(map.truncated_distance(xj, p.delta))) + Real(p.b);
    ma = std::min(ma, a);
    mb = std::min(mb, b);
  }
  out.expansion_margin = static_cast<double>(ma);
  out.recurrence_margin = static_cast<double>(mb);
  out.hyperbolic = ma >= 0 && mb >= 0;
  return out;
}

}  // namespace

HTCheck is_hyperbolic_time(const BranchMap1D& map, double x, long n, const HTParams& p,
                           std::uint64_t seed) {
  require(n >= 1, "hyperbolic time must be at least 1");
  const auto pts = orbit(map, x, n, seed);
  if (!pts) return HTCheck{false, false, 0.0, 0.0};
  return tail_check<double>(map, *pts, n, p);
}

HTCheck is_hyperbolic_time_quad(const BranchMap1D& map, double x, long n, const HTParams& p,
                                std::uint64_t seed) {
  require(n >= 1, "hyperbolic time must be at least 1");
  const auto pts = orbit(map, x, n, seed);
  if (!pts) return HTCheck{false, false, 0.0, 0.0};
  return tail_check<Quad>(map, *pts, n, p);
}

HTRecord hyperbolic_times(const BranchMap1D& map, double x0, long N, const HTParams& p,
                          std::uint64_t seed) {
  require(N >= 1, "horizon must be positive");
  HTRecord rec;
  rec.seed = seed;
  rec.horizon = N;
  std::optional<std::vector<double>> pts;
  double x = x0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    pts = orbit(map, x, N, seed);
    if (pts) break;
    // Exact Gamma0 hit: probability zero, shift the seed.
    x = std::clamp(x + 1e-12, map.domain().lo, std::nextafter(map.domain().hi, map.domain().lo));
    ++rec.perturbations;
  }
  require(pts.has_value(), "orbit keeps hitting the singular set");
  rec.x0 = x;
  // Prefix sums S_m, T_m; n is hyperbolic iff S_n, T_n are running maxima over m < n.
  CompensatedSum s, t;
  double smax = 0.0, tmax = 0.0;
  for (long m = 0; m < N; ++m) {
    const double xm = (*pts)[m];
    s.add(std::log(std::abs(map.derivative(xm))) - p.c);
    t.add(std::log(map.truncated_distance(xm, p.delta)) + p.b);
    const long n = m + 1;
    if (s.value() >= smax && t.value() >= tmax) rec.times.push_back(n);
    smax = std::max(smax, s.value());
    tmax = std::max(tmax, t.value());
  }
  rec.theta = static_cast<double>(rec.times.size()) / static_cast<double>(N);
  return rec;
}

HTEnsemble ht_frequency(const BranchMap1D& map, int seeds, long N, const HTParams& p,
                        std::uint64_t seed) {
  require(seeds > 0, "need at least one seed");
  require(N >= 1000, "hyperbolic-time frequency needs N >= 1000");
  p.validate(map);
  HTEnsemble out;
  out.records.resize(seeds);
  parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const auto& d = map.domain();
    const double x0 = d.lo + d.length() * uniform01(rng);
    out.records[i] = hyperbolic_times(map, x0, N, p, derive_seed(seed ^ 0x9e3779b97f4a7c15ULL, i));
  });
  out.theta_min = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& r : out.records) {
    out.theta_min = std::min(out.theta_min, r.theta);
    out.theta_max = std::max(out.theta_max, r.theta);
    sum += r.theta;
    if (r.theta > 0) ++out.positive;
  }
  out.theta_mean = sum / seeds;
  return out;
}

long recheck_quad(const BranchMap1D& map, const HTRecord& rec, const HTParams& p) {
  if (rec.times.empty()) return 0;
  const auto pts = orbit(map, rec.x0, rec.times.back(), rec.seed);
  require(pts.has_value(), "recorded orbit is no longer defined");
  // Tail sums from m to n are S_n - S_m, so the check is a running-max test in quad.
  Quad s = 0, t = 0, smax = 0, tmax = 0;
  std::size_t next = 0;
  long bad = 0;
  for (long m = 0; m < rec.times.back(); ++m) {
    const double xm = (*pts)[m];
    s += boost::multiprecision::log(Quad(std::abs(map.derivative(xm)))) - Quad(p.c);
    t += boost::multiprecision::log(Quad(map.truncated_distance(xm, p.delta))) + Quad(p.b);
    if (rec.times[next] == m + 1) {
      if (s < smax || t < tmax) ++bad;
      ++next;
    }
    smax = std::max(smax, s);
    tmax = std::max(tmax, t);
  }
  return bad;
}

HTConsequences verify_ht_consequences(const BranchMap1D& map, double x, long n,
                                      const HTParams& p, const HTConsequenceOptions& opt,
                                      std::uint64_t seed) {
  require(n >= 1, "hyperbolic time must be at least 1");
  const auto pts = orbit(map, x, n + 1, seed);
  require(pts.has_value(), "orbit undefined up to n");
  std::vector<std::size_t> branch(n);
  for (long j = 0; j < n; ++j) branch[j] = *map.branch_of((*pts)[j]);
  const double xn = (*pts)[n];
  const auto& sing = map.singular_set();

  // Point of the ball B(f^n x, r) intersected with the domain, s in [-1, 1].
  auto ball = [&](double s, double r) {
    const double lo = std::max(xn - r, map.domain().lo), hi = std::min(xn + r, map.domain().hi);
    return 0.5 * (lo + hi) + 0.5 * s * (hi - lo);
  };

  // Pull a point of the ball back k levels along the orbit's branches.
  auto pull = [&](double y, long k) {
    for (long i = 1; i <= k; ++i) y = map.inverse(branch[n - i], y);
    return y;
  };

  auto build = [&](double r, std::vector<Interval>& W) {
    W.clear();
    Interval w{std::max(xn - r, map.domain().lo), std::min(xn + r, map.domain().hi)};
    W.push_back(w);
    for (long k = 1; k <= n; ++k) {
      const auto& br = map.branches()[branch[n - k]];
      const double slack = 1e-12 * std::max(1.0, br.image.length());
      if (w.lo < br.image.lo - slack || w.hi > br.image.hi + slack) return false;
      double a = map.inverse(branch[n - k], w.lo), b = map.inverse(branch[n - k], w.hi);
      if (a > b) std::swap(a, b);
      w = {a, b};
      for (double g : sing)
        if (g > w.lo && g < w.hi) return false;
      W.push_back(w);
    }
    return true;
  };

  // Pair samples in the ball, shared by the contraction and distortion checks.
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
  std::vector<std::pair<double, double>> unit_pairs(opt.pairs);
  for (auto& pr : unit_pairs) pr = {2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};

  auto contraction = [&](double r) {
    double worst = 0.0;
    for (const auto& [a, b] : unit_pairs) {
      double y = ball(a, r), z = ball(b, r);
      const double d0 = std::abs(y - z);
      if (d0 == 0.0) continue;
      for (long k = 1; k <= n; ++k) {
        y = map.inverse(branch[n - k], y);
        z = map.inverse(branch[n - k], z);
        worst = std::max(worst, std::abs(y - z) / d0 / std::exp(-p.c * k / 2));
      }
    }
    return worst;
  };

  HTConsequences out;
  std::vector<Interval> W;
  if (opt.radius > 0) {
    out.inverted = build(opt.radius, W);
    out.beta1 = opt.radius;
  } else {
    for (int j = 0; j <= 50; ++j) {
      const double r = p.delta * std::ldexp(1.0, -j);
      if (build(r, W) && contraction(r) <= 1.0 + 1e-9) {
        out.inverted = true;
        out.beta1 = r;
        break;
      }
    }
  }
  if (!out.inverted) {
    out.contradiction = true;
    return out;
  }
  out.W = W;
  const double r = out.beta1;
  out.worst_contraction = contraction(r);
  out.contraction_ok = out.worst_contraction <= 1.0 + 1e-9;

  // Distortion of (f^n)' over W_n.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> level_n;
  for (const auto& [a, b] : unit_pairs) {
    for (double s : {a, b}) {
      double y = pull(ball(s, r), n);
      level_n.push_back(y);
      double logd = 0.0;
      for (long j = 0; j < n; ++j) {
        logd += std::log(std::abs(map.branches()[branch[j]].derivative(y)));
        y = map.branches()[branch[j]].map(y);
      }
      lo = std::min(lo, logd);
      hi = std::max(hi, logd);
    }
  }
  out.beta2 = std::exp(hi - lo);

  if (opt.lift) {
    const auto& sec = opt.lift->sections().at(0);
    int first = -1;
    for (double y : level_n) {
      SectionPoint z{0, Vec2(opt.lift_u, sec.leaf_to_v(y))};
      int crossings = 0;
      bool ok = true;
      for (long k = 0; k < n && ok; ++k) {
        const auto s = opt.lift->first_return(z);
        ok = s.ok();
        crossings += s.crossings;
        z = s.image;
      }
      if (!ok || (first >= 0 && crossings != first)) {
        out.crossings_constant = false;
        break;
      }
      first = crossings;
    }
  }
  return out;
}

void write_ht_csv(std::ostream& os, const std::vector<HTRecord>& records) {
  os << "seed,n_k,theta\n";
  for (const auto& r : records) {
    os << r.seed << ',';
    for (std::size_t i = 0; i < r.times.size(); ++i) os << (i ? ";" : "") << r.times[i];
    os << ',' << fmt_double(r.theta) << '\n';
  }
}

}  // namespace shlab
