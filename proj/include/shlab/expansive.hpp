#pragma once

#include "shlab/flow.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace shlab {

// The probes below measure or falsify; they never prove expansiveness.

struct AlignmentOptions {
  double grid_dt = 0.01;
  double band_time = 0.5;   // |h(t) - t| bounded by this window
  double prune_above = std::numeric_limits<double>::infinity();  // stop once every path exceeds it
};

/// Monotone grid alignment h minimizing max_i |x_i - y_{h(i)}|, ties broken by
/// the sum of distances. Steps (a, b) with 1 <= a, b <= 4 and b/a in [1/4, 4];
/// h(0) = 0 and h(n-1) = m-1.
struct AlignmentResult {
  double sup_distance = 0.0;
  double unaligned_distance = 0.0;  // h = identity
  std::vector<int> h;               // y index for every x index
  bool pruned = false;              // sup_distance is only a lower bound
};

AlignmentResult monotone_alignment(const std::vector<Vec3>& xs, const std::vector<Vec3>& ys,
                                   const AlignmentOptions& opt = {});

/// Smallest distance from y to X_s(x) over s in [t0 - eps, t0 + eps].
struct ClosestApproach {
  double distance = 0.0;
  double time = 0.0;
};

ClosestApproach closest_approach(const Trajectory& x, const Vec3& y, double t0, double eps);

struct SyncWitness {
  bool found = false;
  double t0 = 0.0;
  double offset = 0.0;    // |closest-approach time - t0|
  double distance = 0.0;  // closest-approach distance at the witness
};

/// Searches t0 on a stride of the grid for X_{h(t0)}(y) within `spatial_tol`
/// of the x-orbit piece X_{[t0 - eps, t0 + eps]}(x).
SyncWitness synchronization_witness(const Trajectory& x, const std::vector<Vec3>& ys,
                                    const std::vector<int>& h, double grid_dt, double eps,
                                    double spatial_tol, int stride = 100);

struct ExpansivenessOptions {
  double T = 100.0;
  double grid_dt = 0.01;
  double band_time = 0.5;
  double spatial_tol = 1e-4;
  double transient = 50.0;
  std::vector<double> deltas = {40, 20, 10, 5, 2, 1, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
};

struct PairProbe {
  bool control = false;  // same orbit shifted by less than epsilon
  double shift = 0.0;
  double start_distance = 0.0;
  AlignmentResult alignment;
  SyncWitness witness;
};

struct ViolationRow {
  double delta = 0.0;
  int close = 0;       // independent pairs with aligned distance <= delta
  int violations = 0;  // close pairs without a synchronization witness
};

struct ExpansivenessReport {
  double epsilon = 0.0;
  std::vector<PairProbe> pairs;
  std::vector<ViolationRow> curve;  // descending delta
  double delta_hat = 0.0;           // largest grid delta with zero violations (0 if none)
  int controls = 0;
  int controls_synchronized = 0;
};

/// Independent pairs: an attractor point and the nearest point of a second,
/// independent attractor orbit. Controls: the same orbit shifted by s < eps.
ExpansivenessReport expansiveness_probe(const FlowSystem& flow, double epsilon, int n_pairs,
                                        const Vec3& x0, std::uint64_t seed = 1,
                                        const ExpansivenessOptions& opt = {});

struct SensitivityReport {
  std::vector<double> times;  // separation times of separated perturbations
  int capped = 0;             // perturbations that never separated before t_cap
  double median = 0.0;
  double predicted = 0.0;     // log(delta_s / r0) / lambda_plus
  double rel_dev = 0.0;
};

/// Time until |X_t(x) - X_t(x + r0 v)| > delta_s for random unit v.
SensitivityReport sensitivity_probe(const FlowSystem& flow, const Vec3& x, double r0, double delta_s,
                                    int perturbations, double lambda_plus, double t_cap = 100.0,
                                    std::uint64_t seed = 1, double dt = 0.01);

/// Columns delta,n_pairs_close,n_violations.
void write_violation_csv(std::ostream& os, const std::vector<ViolationRow>& curve);

}  // namespace shlab
