#pragma once

#include "shlab/interval_map.hpp"
#include "shlab/section.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace shlab {

/// (b, c, delta): recurrence budget and expansion rate per step (log units),
/// truncation radius around the singular set.
struct HTParams {
  double b = 0.02;
  double c = 0.1;
  double delta = 1e-4;
  bool enforce_b_below_c4 = true;

  void validate(const BranchMap1D& map) const;
};

/// n is a hyperbolic time for x when for every 1 <= k <= n
///   sum_{j=n-k}^{n-1} log|f'(f^j x)| >= c k   and
///   sum_{j=n-k}^{n-1} log d_delta(f^j x) >= -b k.
/// Margins are the smallest slack of each family (>= 0 when hyperbolic).
struct HTCheck {
  bool defined = true;
  bool hyperbolic = false;
  double expansion_margin = 0.0;
  double recurrence_margin = 0.0;
};

HTCheck is_hyperbolic_time(const BranchMap1D& map, double x, long n, const HTParams& p,
                           std::uint64_t seed = 0);
/// Same check with quad-precision accumulation.
HTCheck is_hyperbolic_time_quad(const BranchMap1D& map, double x, long n, const HTParams& p,
                                std::uint64_t seed = 0);

struct HTRecord {
  double x0 = 0.0;
  std::uint64_t seed = 0;
  long horizon = 0;
  std::vector<long> times;
  double theta = 0.0;
  int perturbations = 0;  // seed shifts after exact Gamma0 hits
};

/// All hyperbolic times n <= N along the orbit of x0 (one O(N) pass).
HTRecord hyperbolic_times(const BranchMap1D& map, double x0, long N, const HTParams& p,
                          std::uint64_t seed = 0);

struct HTEnsemble {
  std::vector<HTRecord> records;
  double theta_min = 0.0;
  double theta_mean = 0.0;
  double theta_max = 0.0;
  int positive = 0;
};

/// Lebesgue-random seeds.
HTEnsemble ht_frequency(const BranchMap1D& map, int seeds, long N, const HTParams& p,
                        std::uint64_t seed = 1);

/// Number of recorded times failing the quad-precision re-check.
long recheck_quad(const BranchMap1D& map, const HTRecord& rec, const HTParams& p);

struct HTConsequenceOptions {
  double radius = 0.0;  // ball radius around f^n(x); 0 selects the largest admissible
  int pairs = 32;
  const ReturnSystem* lift = nullptr;  // crossing counts checked when set
  double lift_u = 0.5;
};

struct HTConsequences {
  bool inverted = false;        // W_k built for all k without straddling Gamma0
  double beta1 = 0.0;           // radius of the ball W_n is mapped onto
  std::vector<Interval> W;      // W[k] = preimage at depth k (W[0] is the ball)
  double worst_contraction = 0.0;  // max over k, pairs of ratio / exp(-c k / 2)
  bool contraction_ok = false;
  double beta2 = 0.0;           // max/min of |(f^n)'| over W_n
  bool crossings_constant = true;
  bool contradiction = false;   // inversion failed although n is hyperbolic
};

HTConsequences verify_ht_consequences(const BranchMap1D& map, double x, long n,
                                      const HTParams& p, const HTConsequenceOptions& opt = {},
                                      std::uint64_t seed = 0);

/// Columns seed,n_k,theta; n_k is a ';'-separated list.
void write_ht_csv(std::ostream& os, const std::vector<HTRecord>& records);

}  // namespace shlab
