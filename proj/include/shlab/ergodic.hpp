#pragma once

#include "shlab/flow.hpp"
#include "shlab/models.hpp"
#include "shlab/section.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace shlab {

struct Observable {
  std::string name;
  std::function<double(const Vec3&)> fn;
};

/// Weighted point cloud from one orbit.
struct EmpiricalMeasure {
  std::vector<Vec3> points;
  std::vector<double> weights;  // nonnegative, sum 1
  std::uint64_t seed = 0;
  double T = 0.0;
  double dt = 0.0;

  double integrate(const std::function<double(const Vec3&)>& phi) const;
};

EmpiricalMeasure empirical_measure(const FlowSystem& flow, const Vec3& x0, double T, double dt,
                                   double transient = 10.0, std::uint64_t seed = 0);

/// Axis-aligned region used to draw Lebesgue-uniform seeds.
struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

/// Uniform seeds in the trapping ball when declared, otherwise in `box`.
std::vector<Vec3> uniform_seeds(const FlowSystem& flow, int n, std::uint64_t seed,
                                const Box3& box = {});

struct BirkhoffOptions {
  double transient = 10.0;
  double dt = 0.01;
  double tol = 1e-9;
  int checkpoints = 4;            // running averages at T / 2^k, k < checkpoints
  double cluster_fraction = 0.01;  // agreement threshold relative to observable range
  Box3 box;                        // seed region when no trapping ball is declared
};

struct ObservableSummary {
  std::string name;
  std::vector<double> averages;  // per kept seed
  double mean = 0.0;
  double spread = 0.0;  // max - min
  double range = 0.0;   // observable range seen along the orbits
  /// (time, spread) at the checkpoints and the fitted slope of log spread vs log time.
  std::vector<std::pair<double, double>> spread_history;
  double rate = 0.0;
};

struct BirkhoffReport {
  std::vector<ObservableSummary> observables;
  int seeds = 0;
  int escaped = 0;
  int clusters = 0;
  std::vector<int> cluster_of;      // per kept seed
  double largest_cluster_fraction = 0.0;
};

/// Time averages of each observable from Lebesgue-random seeds, their spread,
/// convergence rate, and single-linkage clusters of the average vectors.
BirkhoffReport birkhoff_uniqueness(const FlowSystem& flow, const std::vector<Observable>& obs,
                                   int seeds, double T, std::uint64_t seed = 1,
                                   const BirkhoffOptions& opt = {});

/// Bistable toy: x' = x - x^3 with a stable rotation cycle in (y, z).
/// Two attractors at x = +1 and x = -1.
FlowSystem double_well_rotation();
/// Linear test flow x' = a x, y' = 1, z' = -b z: exponents (a, 0, -b) exactly.
FlowSystem linear_test_flow(double a = 0.5, double b = 1.5);
/// Limit cycle y' = y(0.64 - r^2) - z, z' = z(0.64 - r^2) + y with x' = 0.25 - x.
FlowSystem periodic_toy_flow();

struct SpectrumRecord {
  Vec3 seed_point = Vec3::Zero();
  std::array<double, 3> exponents{};  // lambda+, lambda0, lambda-
  double mean_divergence = 0.0;
  bool structure_ok = false;  // lambda+ > 0 > lambda-, |lambda0| < zero_tol, lambda+ + lambda0 > 0
  double divergence_gap = 0.0;  // |sum - mean divergence| / |mean divergence|
};

struct SpectrumReport {
  std::vector<SpectrumRecord> records;
  bool all_ok = false;
  double worst_zero_exponent = 0.0;
  double worst_divergence_gap = 0.0;
};

SpectrumReport spectrum_structure(const FlowSystem& flow, const std::vector<Vec3>& seeds, double T,
                                  double zero_tol = 5e-3, const LyapunovOptions& opt = {});

struct EntropyRecord {
  double qr = 0.0;            // (a) top QR exponent
  double unstable = 0.0;      // (b) mean one-step normal expansion along the unstable direction
  double cu_det = 0.0;        // (c) mean log |det DX_1 on E^cu| minus the flow-direction term
  double max_rel_dev = 0.0;   // largest pairwise relative deviation
  double quality = 0.0;       // median |cos| between the top QR vector and the flow direction
};

struct EntropyReport {
  std::vector<EntropyRecord> records;
  double worst_rel_dev = 0.0;
};

EntropyReport entropy_formula_check(const FlowSystem& flow, const std::vector<Vec3>& seeds, double T,
                                    double transient = 50.0, double tol = 1e-9);

/// Abramov relation on the geometric model: the quotient-map exponent
/// int log|f'| equals lambda+ of the flow times the mean return time.
struct AbramovReport {
  double map_exponent = 0.0;   // 1D map, long orbit
  double flow_exponent = 0.0;  // from 2D return Jacobians per unit flow time
  double mean_return_time = 0.0;
  double rel_dev = 0.0;
  long returns = 0;
};

AbramovReport abramov_check(const GeometricLorenzFlow& g, long returns, std::uint64_t seed = 1);

/// Conditional densities on one cu-leaf split into bands. Bins in each band
/// cover the cu-arclength range; densities are per unit area of the leaf and
/// integrate to 1 over the leaf.
struct DensityBand {
  double band_lo = 0.0, band_hi = 0.0;
  std::vector<double> density;
  std::vector<double> distance;  // distance to the singularity per bin
  std::vector<long> counts;
};

struct DensityProfile {
  int strip = 0;
  Interval cu_range;
  std::vector<DensityBand> bands;
  long samples = 0;

  double max_density() const;
  double median_density() const;  // over bins with positive counts
  /// Mean density of the bins whose centre is within `radius` of the singularity.
  double density_near_singularity(double radius) const;
};

/// Histogram of (a, b) samples: a is the cu-arclength coordinate, b the band coordinate.
DensityProfile density_from_samples(const std::vector<std::array<double, 2>>& samples,
                                    Interval a_range, Interval b_range, int bands, int bins,
                                    const std::function<double(double, double)>& distance,
                                    int strip = 0);

struct ProfileReport {
  std::vector<DensityProfile> coarse, fine;  // per strip, bins and 2*bins
  double sup_coarse = 0.0, sup_fine = 0.0;
  double refinement_ratio = 0.0;  // sup_fine / sup_coarse
  double near_density = 0.0;      // band nearest the singularity
  double median_density = 0.0;
  bool bounded = false;           // refinement within 25%
  bool decays = false;            // near < median / 2
};

/// Flow-time samples inside the flow box of the geometric model, one strip per
/// wing. cu-leaf coordinates are (x1, x3): x1 is the unstable arclength and x3
/// bands measure the approach to the singularity at the origin.
ProfileReport unstable_density_profile(const GeometricLorenzFlow& g, double T, int bands, int bins,
                                       double near_radius = 0.1, std::uint64_t seed = 1,
                                       double dt = 0.01);

struct CoverageReport {
  double fraction = 0.0;  // cells of the test orbit among cells of the union
  long cells_orbit = 0;
  long cells_union = 0;
  std::vector<std::pair<double, double>> history;  // (time, fraction)
};

/// Grid-cell coverage of one orbit against the union of `union_orbits` orbits.
CoverageReport support_coverage(const FlowSystem& flow, const Vec3& x0, double T, double h,
                                int union_orbits = 10, std::uint64_t seed = 1, double dt = 0.01,
                                int checkpoints = 4);

void write_spectrum_csv(std::ostream& os, const SpectrumReport& rep);
/// Columns strip,band_lo,band_hi,bin,cu_lo,cu_hi,distance,count,density.
void write_profile_csv(std::ostream& os, const std::vector<DensityProfile>& profiles);

}  // namespace shlab
