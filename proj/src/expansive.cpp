#include "shlab/expansive.hpp"

#include "shlab/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

namespace shlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Move {
  int a, b;
};
constexpr std::array<Move, 7> kMoves{{{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}, {1, 4}, {4, 1}}};

// Lexicographic path cost: bottleneck first, then total distance.
struct Cost {
  double max = kInf;
  double sum = kInf;
  bool operator<(const Cost& o) const { return max < o.max || (max == o.max && sum < o.sum); }
};

int intermediate(int k, const Move& mv) {
  return static_cast<int>(std::lround(static_cast<double>(k) * mv.b / mv.a));
}

}  // namespace

AlignmentResult monotone_alignment(const std::vector<Vec3>& xs, const std::vector<Vec3>& ys,
                                   const AlignmentOptions& opt) {
  require(xs.size() >= 2 && ys.size() >= 2, "alignment needs at least two samples per orbit");
  require(opt.grid_dt > 0 && opt.grid_dt <= 0.01, "alignment grid step must be in (0, 0.01]");
  require(opt.band_time >= 0, "alignment band must be nonnegative");
  const int n = static_cast<int>(xs.size());
  const int m = static_cast<int>(ys.size());
  require(4 * (n - 1) >= m - 1 && 4 * (m - 1) >= n - 1,
          "orbit lengths incompatible with slope bounds [1/4, 4]");

  const double ratio = static_cast<double>(m - 1) / (n - 1);
  auto diag = [&](int i) { return static_cast<int>(std::lround(i * ratio)); };
  const int band = std::max(4, static_cast<int>(std::lround(opt.band_time / opt.grid_dt)));
  const int width = 2 * band + 1;

  AlignmentResult res;
  for (int i = 0; i < n; ++i)
    res.unaligned_distance = std::max(res.unaligned_distance, (xs[i] - ys[diag(i)]).norm());

  std::vector<Cost> cost(static_cast<std::size_t>(n) * width);
  std::vector<std::int8_t> from(static_cast<std::size_t>(n) * width, -1);
  auto slot = [&](int i, int j) -> long {
    const int off = j - diag(i) + band;
    if (j < 0 || j >= m || off < 0 || off >= width) return -1;
    return static_cast<long>(i) * width + off;
  };

  const double d00 = (xs[0] - ys[0]).norm();
  cost[slot(0, 0)] = {d00, d00};
  double recent_min[4] = {d00, kInf, kInf, kInf};

  for (int i = 1; i < n; ++i) {
    double row_min = kInf;
    for (int off = 0; off < width; ++off) {
      const int j = diag(i) - band + off;
      if (j < 0 || j >= m) continue;
      Cost best;
      int best_mv = -1;
      for (int k = 0; k < static_cast<int>(kMoves.size()); ++k) {
        const Move& mv = kMoves[k];
        const long p = slot(i - mv.a, j - mv.b);
        if (i - mv.a < 0 || p < 0 || !std::isfinite(cost[p].max)) continue;
        Cost c = cost[p];
        for (int q = 1; q <= mv.a; ++q) {
          const double d = (xs[i - mv.a + q] - ys[j - mv.b + intermediate(q, mv)]).norm();
          c.max = std::max(c.max, d);
          c.sum += d;
        }
        if (c < best) {
          best = c;
          best_mv = k;
        }
      }
      const long s = static_cast<long>(i) * width + off;
      cost[s] = best;
      from[s] = static_cast<std::int8_t>(best_mv);
      row_min = std::min(row_min, best.max);
    }
    recent_min[i % 4] = row_min;
    const double window_min =
        std::min({recent_min[0], recent_min[1], recent_min[2], recent_min[3]});
    if (window_min > opt.prune_above) {
      res.sup_distance = window_min;
      res.pruned = true;
      return res;
    }
  }

  const long end = slot(n - 1, m - 1);
  if (end < 0 || !std::isfinite(cost[end].max))
    throw NumericalError("no admissible alignment inside the band");
  res.sup_distance = cost[end].max;

  res.h.assign(n, 0);
  int i = n - 1, j = m - 1;
  res.h[i] = j;
  while (i > 0) {
    const int k = from[slot(i, j)];
    if (k < 0) throw NumericalError("alignment traceback broke");
    const Move& mv = kMoves[k];
    for (int q = 1; q < mv.a; ++q) res.h[i - mv.a + q] = j - mv.b + intermediate(q, mv);
    i -= mv.a;
    j -= mv.b;
    res.h[i] = j;
  }
  return res;
}

ClosestApproach closest_approach(const Trajectory& x, const Vec3& y, double t0, double eps) {
  require(eps > 0, "closest approach needs a positive window");
  const double lo = std::max(x.t_begin(), t0 - eps);
  const double hi = std::min(x.t_end(), t0 + eps);
  require(lo <= hi, "closest approach window outside the trajectory");
  auto dist = [&](double s) { return (x.at(s) - y).norm(); };

  const int scan = 200;
  const double step = (hi - lo) / scan;
  ClosestApproach best{dist(lo), lo};
  for (int k = 1; k <= scan; ++k) {
    const double s = lo + k * step;
    const double d = dist(s);
    if (d < best.distance) best = {d, s};
  }
  if (step == 0.0) return best;

  // Golden-section refinement inside the neighbouring scan cells.
  double a = std::max(lo, best.time - step), b = std::min(hi, best.time + step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = dist(c), fd = dist(d);
  for (int it = 0; it < 80 && b - a > 1e-15; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = dist(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = dist(d);
    }
  }
  const double s = 0.5 * (a + b);
  const double ds = dist(s);
  if (ds < best.distance) best = {ds, s};
  return best;
}

SyncWitness synchronization_witness(const Trajectory& x, const std::vector<Vec3>& ys,
                                    const std::vector<int>& h, double grid_dt, double eps,
                                    double spatial_tol, int stride) {
  require(!h.empty(), "witness search needs an alignment path");
  require(stride >= 1, "witness stride must be positive");
  SyncWitness best;
  best.distance = kInf;
  for (std::size_t i = 0; i < h.size(); i += static_cast<std::size_t>(stride)) {
    const double t0 = x.t_begin() + static_cast<double>(i) * grid_dt;
    const ClosestApproach ca = closest_approach(x, ys[h[i]], t0, eps);
    if (ca.distance < best.distance) {
      best.t0 = t0;
      best.offset = std::abs(ca.time - t0);
      best.distance = ca.distance;
    }
    if (ca.distance <= spatial_tol) {
      best.found = true;
      return best;
    }
  }
  return best;
}

ExpansivenessReport expansiveness_probe(const FlowSystem& flow, double epsilon, int n_pairs,
                                        const Vec3& x0, std::uint64_t seed,
                                        const ExpansivenessOptions& opt) {
  require(epsilon > 0, "epsilon must be positive");
  require(n_pairs >= 1, "need at least one pair");
  require(opt.T > 0 && !opt.deltas.empty(), "probe needs T > 0 and a delta grid");
  require(opt.grid_dt > 0 && opt.grid_dt <= 0.01, "probe grid step must be in (0, 0.01]");

  Rng rng(seed);
  std::vector<double> deltas = opt.deltas;
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  require(deltas.back() > 0, "delta grid must be positive");

  // Two independent attractor orbits: one supplies base points, the other neighbours.
  const double pool_time = 2000.0;
  const Vec3 a0 = flow_to(flow, x0, opt.transient);
  Vec3 b0 = x0;
  for (int k = 0; k < 3; ++k) b0[k] += 1e-3 * (2.0 * uniform01(rng) - 1.0);
  b0 = flow_to(flow, b0, opt.transient + 7.3);
  std::vector<Vec3> pool_a, pool_b;
  sample_orbit(flow, a0, pool_time, 0.01, [&](double, const Vec3& p) { pool_a.push_back(p); });
  sample_orbit(flow, b0, pool_time, 0.05, [&](double, const Vec3& p) { pool_b.push_back(p); });

  AlignmentOptions aopt;
  aopt.grid_dt = opt.grid_dt;
  aopt.band_time = opt.band_time;

  ExpansivenessReport rep;
  rep.epsilon = epsilon;
  auto probe_pair = [&](const Vec3& xp, const Vec3& yp, bool control, double shift) {
    PairProbe pp;
    pp.control = control;
    pp.shift = shift;
    pp.start_distance = (xp - yp).norm();
    const Trajectory tx = shlab::flow(flow, xp, opt.T);
    const Trajectory ty = shlab::flow(flow, yp, opt.T);
    const std::vector<Vec3> xs = tx.sample(opt.grid_dt), ys = ty.sample(opt.grid_dt);
    AlignmentOptions o = aopt;
    if (!control) o.prune_above = deltas.front();
    pp.alignment = monotone_alignment(xs, ys, o);
    if (!pp.alignment.pruned)
      pp.witness = synchronization_witness(tx, ys, pp.alignment.h, opt.grid_dt, epsilon,
                                           opt.spatial_tol);
    return pp;
  };

  for (int k = 0; k < n_pairs; ++k) {
    const Vec3 xp = pool_a[static_cast<std::size_t>(uniform01(rng) * (pool_a.size() - 1))];
    const Vec3* near = &pool_b.front();
    for (const Vec3& q : pool_b)
      if ((q - xp).squaredNorm() < (*near - xp).squaredNorm()) near = &q;
    rep.pairs.push_back(probe_pair(xp, *near, false, 0.0));
  }

  const int n_controls = std::max(10, n_pairs / 10);
  for (int k = 0; k < n_controls; ++k) {
    const Vec3 xp = pool_a[static_cast<std::size_t>(uniform01(rng) * (pool_a.size() - 1))];
    const double s = epsilon * (0.05 + 0.9 * uniform01(rng));
    const PairProbe pp = probe_pair(xp, flow_to(flow, xp, s), true, s);
    ++rep.controls;
    if (pp.witness.found) ++rep.controls_synchronized;
    rep.pairs.push_back(pp);
  }

  for (double d : deltas) {
    ViolationRow row{d, 0, 0};
    for (const PairProbe& pp : rep.pairs) {
      if (pp.control || pp.alignment.pruned || pp.alignment.sup_distance > d) continue;
      ++row.close;
      if (!pp.witness.found) ++row.violations;
    }
    rep.curve.push_back(row);
  }
  for (const ViolationRow& row : rep.curve)
    if (row.violations == 0) {
      rep.delta_hat = row.delta;
      break;
    }
  return rep;
}

SensitivityReport sensitivity_probe(const FlowSystem& flow, const Vec3& x, double r0, double delta_s,
                                    int perturbations, double lambda_plus, double t_cap,
                                    std::uint64_t seed, double dt) {
  require(r0 > 0 && delta_s > r0, "need 0 < r0 < delta_s");
  require(perturbations >= 1 && t_cap > 0 && dt > 0, "invalid sensitivity parameters");
  std::vector<Vec3> base;
  sample_orbit(flow, x, t_cap, dt, [&](double, const Vec3& p) { base.push_back(p); });

  struct Separated {
    double t;
  };
  Rng rng(seed);
  std::normal_distribution<double> normal;
  SensitivityReport rep;
  for (int k = 0; k < perturbations; ++k) {
    Vec3 v(normal(rng), normal(rng), normal(rng));
    v.normalize();
    std::size_t idx = 0;
    try {
      sample_orbit(flow, x + r0 * v, t_cap, dt, [&](double t, const Vec3& p) {
        if (idx < base.size() && (p - base[idx]).norm() > delta_s) throw Separated{t};
        ++idx;
      });
      ++rep.capped;
    } catch (const Separated& s) {
      rep.times.push_back(s.t);
    }
  }
  if (!rep.times.empty()) {
    std::vector<double> t = rep.times;
    std::sort(t.begin(), t.end());
    const std::size_t h = t.size() / 2;
    rep.median = t.size() % 2 ? t[h] : 0.5 * (t[h - 1] + t[h]);
  } else {
    rep.median = kInf;
  }
  if (lambda_plus > 0) {
    rep.predicted = std::log(delta_s / r0) / lambda_plus;
    rep.rel_dev = std::abs(rep.median - rep.predicted) / rep.predicted;
  } else {
    rep.predicted = kInf;
    rep.rel_dev = kInf;
  }
  return rep;
}

void write_violation_csv(std::ostream& os, const std::vector<ViolationRow>& curve) {
  os << "delta,n_pairs_close,n_violations\n";
  os.precision(17);
  for (const ViolationRow& r : curve) os << r.delta << ',' << r.close << ',' << r.violations << '\n';
}

}  // namespace shlab
