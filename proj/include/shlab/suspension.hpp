#pragma once

#include "shlab/interval_map.hpp"
#include "shlab/models.hpp"
#include "shlab/section.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace shlab {

/// Point (x, s) of the suspension, 0 <= s < tau(x).
struct SuspensionPoint {
  double x = 0.0;
  double s = 0.0;
};

/// Roof tau: base -> (0, inf]; infinite on the undefined set.
struct RoofFunction {
  std::string name;
  std::function<double(double)> tau;
  double inf_tau = 0.0;  // declared positive lower bound
};

RoofFunction constant_roof(double value);
/// tau(x) = -log|x| / lambda1 + transit time: box exit time plus flight time.
RoofFunction exit_time_roof(const GeometricLorenzSpec& spec);

/// Observable on the suspension.
using SuspensionObservable = std::function<double(double x, double s)>;

struct SemiflowResult {
  SuspensionPoint point;
  bool terminated = false;  // base orbit hit Gamma
  double remaining = 0.0;   // flow time left when terminated
  long roof_crossings = 0;
};

/// Suspension semiflow X^t(x, s) = (x, s + t) modulo (x, tau(x)) ~ (F(x), 0).
class Suspension {
 public:
  Suspension(const BranchMap1D& base, RoofFunction roof);

  const BranchMap1D& base() const { return *base_; }
  const RoofFunction& roof() const { return roof_; }

  SemiflowResult flow(SuspensionPoint p, double t) const;

 private:
  const BranchMap1D* base_;
  RoofFunction roof_;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  long samples = 0;
};

struct LiftOptions {
  int nodes_per_unit = 64;  // composite midpoint nodes per unit of roof
  double roof_cap = 50.0;   // roof values above are truncated
};

/// mu_X built from mu_F samples:
///   mu_X(phi) = sum_i w_i int_0^{tau(x_i)} phi(x_i, t) dt / sum_i w_i tau(x_i).
class LiftedMeasure {
 public:
  LiftedMeasure(std::vector<double> base_samples, std::vector<double> weights,
                const RoofFunction& roof, LiftOptions opt = {});

  Estimate evaluate(const SuspensionObservable& phi) const;
  /// mu_X(phi o X^t).
  Estimate evaluate_after(const Suspension& sus, const SuspensionObservable& phi, double t) const;

  /// Sampled mu_F(tau) after truncation.
  double mean_roof() const { return mean_roof_; }
  long excluded() const { return excluded_; }      // samples with tau = inf
  double truncated_mass() const { return truncated_mass_; }  // share of roof cut by the cap
  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, w_, tau_;
  LiftOptions opt_;
  double wsum_ = 0.0, mean_roof_ = 0.0, truncated_mass_ = 0.0;
  long excluded_ = 0;
};

/// mu_F as the empirical measure of one long base orbit (equal weights).
LiftedMeasure lift_orbit_measure(const BranchMap1D& base, const RoofFunction& roof, double x0,
                                 std::size_t n, std::uint64_t seed = 0, std::size_t burn = 1000,
                                 LiftOptions opt = {});

/// max over (phi, t) of |mu_X(phi o X^t) - mu_X(phi)|.
double invariance_test(const LiftedMeasure& m, const Suspension& sus,
                       const std::vector<SuspensionObservable>& phis,
                       const std::vector<double>& ts);

/// Family of smooth observables cos(2 pi (a x + b s) + c) with fixed seeds.
std::vector<SuspensionObservable> trig_observables(int count, std::uint64_t seed);

struct Bracket {
  int n = 0;
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct BracketReport {
  std::vector<Bracket> brackets;
  double worst_ratio = 0.0;  // max width(n)/width(n-1) over n >= ratio_from, width(n-1) > resolution
  bool contraction_violation = false;
  long undefined = 0;  // leaf samples dropped at Gamma
};

/// Brackets [int (psi o R^n)_- d mu, int (psi o R^n)_+ d mu] over the
/// vertical-leaf partition of one section; inf/sup over equispaced leaf samples.
/// Widths at or below `resolution` (return-map accuracy) count as converged.
BracketReport quotient_measure_bracket(const ReturnSystem& sys, int section,
                                       const std::vector<double>& base_samples,
                                       const std::function<double(const SectionPoint&)>& psi,
                                       int n_max, int leaf_samples = 33, int ratio_from = 5,
                                       double resolution = 1e-8);
/// Singleton partition of an interval map: both ends equal mu_f(psi o f^n).
BracketReport quotient_measure_bracket(const BranchMap1D& f, const std::vector<double>& base_samples,
                                       const std::function<double(double)>& psi, int n_max);

struct TimeAverage {
  double value = 0.0;
  double time = 0.0;  // flow time covered
  bool terminated = false;
};

/// (1/T) int_0^T phi(X^t(p)) dt, one quadrature per roof segment. The base
/// orbit follows Orbit1D so digit maps stay typical.
TimeAverage flow_time_average(const Suspension& sus, SuspensionPoint p, const SuspensionObservable& phi,
                              double T, std::uint64_t seed = 0, int nodes_per_unit = 64);

/// Time average with a batch-means standard error.
struct TimeAverageEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  bool terminated = false;
};

TimeAverageEstimate flow_time_average_batched(const Suspension& sus, SuspensionPoint p,
                                              const SuspensionObservable& phi, double T,
                                              std::uint64_t seed = 0, int batches = 20);

struct TransferReport {
  std::vector<TimeAverageEstimate> averages;
  double worst_z = 0.0;  // max |a_i - a_j| / sqrt(se_i^2 + se_j^2)
  long pairs = 0;
  long pairs_above_3 = 0;
};

/// Flow-time averages from Lebesgue-random base points with zero height.
TransferReport ergodicity_transfer(const Suspension& sus, const SuspensionObservable& phi,
                                   int starts, double T, std::uint64_t seed = 1);

struct EvaluationRow {
  std::string id;
  Estimate estimate;
};

/// Columns observable_id,estimate,stderr,n_samples.
void write_evaluations_csv(std::ostream& os, const std::vector<EvaluationRow>& rows);

}  // namespace shlab
