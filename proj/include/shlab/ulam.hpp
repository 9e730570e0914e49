#pragma once

#include "shlab/interval_map.hpp"

#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace shlab {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Ulam discretization of the transfer operator on N equal bins.
struct UlamChain {
  Interval domain{};
  int bins = 0;
  std::vector<double> edges;  // bins + 1 points
  /// Row i: fraction of bin i mapped into bin j.
  SparseRowMatrix transition;

  double width() const { return domain.length() / bins; }
  int bin_of(double x) const;
  double max_row_sum_error() const;
};

UlamChain build_ulam(const BranchMap1D& map, int bins);

/// Invariant densities of the chain, one per closed communicating class.
struct ErgodicDecomposition {
  /// densities[c][i]: value of the c-th density on bin i (w.r.t. Lebesgue).
  std::vector<std::vector<double>> densities;
  /// Bin -> component index, or -1 for transient bins.
  std::vector<int> labels;
  std::vector<double> residuals;  // ||pi P - pi||_1 per component
  std::vector<int> iterations;

  std::size_t components() const { return densities.size(); }
};

struct StationaryOptions {
  double tol = 1e-12;
  int max_iterations = 100000;
  double laziness = 0.1;  // iterate pi <- a pi + (1 - a) pi P; removes periodicity
};

ErgodicDecomposition stationary_density(const UlamChain& chain, const StationaryOptions& opt = {});

struct DensityReport {
  double sup = 0.0;
  double total_mass = 0.0;
  std::vector<Interval> support;  // maximal runs of bins above the threshold
  double longest_support_bins = 0.0;
};

DensityReport density_diagnostics(const UlamChain& chain, const std::vector<double>& density,
                                  double threshold = 1e-6);

struct BasinOptions {
  int seeds = 500;
  long iterations = 100000;
  int classify_bins = 32;
  double threshold = 5e-2;
  std::uint64_t seed = 1;
};

struct BasinReport {
  std::vector<double> fractions;  // per component, over all non-discarded seeds
  double unclassified = 0.0;
  int discarded = 0;              // orbits that hit the singular set
  int seeds = 0;
  std::vector<int> labels;        // per seed: component, -1 unclassified, -2 discarded
  std::vector<double> distances;  // per seed: L1 distance to the nearest density
};

BasinReport basin_coverage(const BranchMap1D& map, const UlamChain& chain,
                           const ErgodicDecomposition& dec, const BasinOptions& opt = {});

/// Coarsened probability mass of a chain density on `coarse` equal bins.
std::vector<double> coarse_masses(const UlamChain& chain, const std::vector<double>& density,
                                  int coarse);

/// max over observables of |<pi, P phi> - <pi, phi>| for random bounded phi.
double transfer_duality_residual(const UlamChain& chain, const std::vector<double>& density,
                                 int observables = 100, std::uint64_t seed = 7);

/// Integral of log|f'| against the chain density (16-point Gauss per bin).
double lyapunov_from_density(const BranchMap1D& map, const UlamChain& chain,
                             const std::vector<double>& density);

/// Mean of (1/n) sum log|f'(x_k)| over Lebesgue-random seeds.
double lyapunov_from_orbits(const BranchMap1D& map, int seeds, long iterations,
                            std::uint64_t seed = 3);

/// L1 distance between densities on two chains over a common refinement.
double density_l1_distance(const UlamChain& a, const std::vector<double>& da, const UlamChain& b,
                           const std::vector<double>& db);

/// Integral of g against the density, g evaluated by 16-point Gauss per bin.
double integrate_against(const UlamChain& chain, const std::vector<double>& density,
                         const std::function<double(double)>& g);

void write_density_csv(std::ostream& os, const UlamChain& chain, const std::vector<double>& density);
void write_chain_csv(std::ostream& os, const UlamChain& chain);

}  // namespace shlab
