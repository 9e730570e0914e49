#pragma once

#include "shlab/flow.hpp"
#include "shlab/interval_map.hpp"
#include "shlab/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shlab {

/// Planar cross-section with an affine square chart
///   chart(u, v) = origin + (u - 1/2) eu + (v - 1/2) ev,  (u, v) in [0,1]^2.
/// The second coordinate v indexes the stable leaves {v = const}; the normal
/// is eu x ev normalized, and crossings count when orientation * <X, n> > 0.
class CrossSection {
 public:
  CrossSection(Vec3 origin, Vec3 eu, Vec3 ev, int orientation, double delta,
               Interval leaf_interval);

  Vec3 chart(const Vec2& uv) const;
  /// Chart coordinates of the projection of x onto the plane.
  Vec2 coordinates(const Vec3& x) const;
  double level(const Vec3& x) const { return normal_.dot(x - origin_); }
  bool covers(const Vec2& uv, double slack = 1e-9) const;

  const Vec3& origin() const { return origin_; }
  const Vec3& eu() const { return eu_; }
  const Vec3& ev() const { return ev_; }
  const Vec3& normal() const { return normal_; }
  int orientation() const { return orientation_; }
  double delta() const { return delta_; }

  /// Leaf coordinate on the quotient interval I_Sigma and back.
  const Interval& leaf_interval() const { return leaf_interval_; }
  double leaf(double v) const { return leaf_interval_.lo + v * leaf_interval_.length(); }
  double leaf_to_v(double x) const { return (x - leaf_interval_.lo) / leaf_interval_.length(); }

  /// Tangent vector of the manifold for chart components (du, dv).
  Vec3 push(const Vec2& duv) const { return duv[0] * eu_ + duv[1] * ev_; }

 private:
  Vec3 origin_, eu_, ev_, normal_;
  Mat2 gram_inv_;
  int orientation_;
  double delta_;
  Interval leaf_interval_;
};

struct SectionPoint {
  int section = 0;
  Vec2 uv = Vec2::Zero();
};

enum class ReturnStatus { ok, stable_manifold, no_return };

const char* to_string(ReturnStatus s);

struct ReturnSample {
  SectionPoint source;
  SectionPoint image;
  double tau = 0.0;
  int crossings = 0;  // section hits up to and including the image
  ReturnStatus status = ReturnStatus::ok;

  bool ok() const { return status == ReturnStatus::ok; }
};

struct ReturnOptions {
  double tol = 1e-10;
  double t_max = 50.0;        // flight time without a hit that signals escape or Gamma
  double event_tol = 1e-10;   // bisection tolerance of crossing times
  double stall_speed = 1e-8;  // |X| below this: converging to an equilibrium
};

/// Flow together with a finite family of sections. first_return follows the
/// orbit of a section point and stops at the first hit after time t_min.
class ReturnSystem {
 public:
  explicit ReturnSystem(ReturnOptions opt) : opt_(opt) {}
  virtual ~ReturnSystem() = default;

  virtual std::string name() const = 0;
  virtual const std::vector<CrossSection>& sections() const = 0;
  virtual Vec3 field(const Vec3& x) const = 0;
  virtual ReturnSample first_return(const SectionPoint& z, double t_min = 0.0) const = 0;

  const ReturnOptions& options() const { return opt_; }
  Vec3 point(const SectionPoint& z) const { return sections().at(z.section).chart(z.uv); }

 protected:
  ReturnOptions opt_;
};

/// Return system of a smooth flow and planar sections (event location on
/// dense output).
class FlowReturnSystem : public ReturnSystem {
 public:
  FlowReturnSystem(FlowSystem system, std::vector<CrossSection> sections, ReturnOptions opt = {});

  std::string name() const override { return system_.name(); }
  const std::vector<CrossSection>& sections() const override { return sections_; }
  Vec3 field(const Vec3& x) const override { return system_.rhs(x); }
  ReturnSample first_return(const SectionPoint& z, double t_min = 0.0) const override;
  const FlowSystem& system() const { return system_; }

 private:
  FlowSystem system_;
  std::vector<CrossSection> sections_;
};

/// Geometric Lorenz flow: the linear Lorenz-like saddle in the box
/// |x1| <= 1, 0 < x3 <= 1 (integrated numerically), with ingoing section
/// {x3 = 1}, exit at |x1| = 1, and an analytic transit back to {x3 = 1}:
///   x1' = s (mu |x1|^beta - 1),  x2' = s fold_offset + leaf_gain y2.
/// Chart: u -> x2, v -> x1, so stable leaves are {x1 = const}.
class GeometricLorenzFlow : public ReturnSystem {
 public:
  explicit GeometricLorenzFlow(GeometricLorenzSpec spec = {}, ReturnOptions opt = {});

  std::string name() const override { return "geometric-lorenz"; }
  const std::vector<CrossSection>& sections() const override { return sections_; }
  Vec3 field(const Vec3& x) const override { return saddle_.rhs(x); }
  ReturnSample first_return(const SectionPoint& z, double t_min = 0.0) const override;

  const GeometricLorenzSpec& spec() const { return spec_; }
  const FlowSystem& saddle() const { return saddle_; }

  /// Flow-time samples of the box part of the orbit of z: observer(t, x) on
  /// the grid t = k*dt while the orbit is inside the box; transit time is
  /// skipped over but counted. Stops after total time T or at a Gamma signal.
  void sample_box(const SectionPoint& z, double T, double dt,
                  const std::function<void(double, const Vec3&)>& observer) const;

 private:
  struct Leg {
    ReturnStatus status = ReturnStatus::ok;
    double box_time = 0.0;
    Vec3 exit = Vec3::Zero();
  };
  Leg run_box(const Vec3& x0, const std::function<void(double, const Vec3&)>* observer,
              double t_offset, double dt, double t_end) const;
  Vec2 transit(const Vec3& exit) const;

  GeometricLorenzSpec spec_;
  FlowSystem saddle_;
  std::vector<CrossSection> sections_;
};

/// Successive single returns from z (burn-in discarded).
std::vector<SectionPoint> attractor_hits(const ReturnSystem& system, const SectionPoint& z0,
                                         int n, int burn = 20);

struct SectionCheck {
  double min_image_distance = 0.0;  // over a chart grid
  double min_transversality = 0.0;  // |<X, n>| / |X| over grid (or supplied points)
  double adaptedness = 0.0;         // distance of hits to the cu-boundary u in {0, 1}
  bool injective = false;
  bool transverse = false;
  bool adapted = false;
};

/// Checks chart injectivity and transversality on a grid x grid lattice and
/// delta-adaptedness from attractor hits. When `transversal_on_hits` is set
/// the transversality is measured on the hits instead of the whole grid.
SectionCheck check_section(const ReturnSystem& system, int section, int grid,
                           const std::vector<SectionPoint>& hits,
                           bool transversal_on_hits = false);

/// Central finite-difference Jacobian (chart coordinates) of the next-hit
/// map; the step is shrunk until two step sizes agree. Empty when the
/// neighbourhood straddles a discontinuity.
std::optional<Mat2> return_jacobian(const ReturnSystem& system, const SectionPoint& z,
                                    double h0 = 1e-6);

/// First hit after t_min together with the chain-rule product of next-hit
/// Jacobians along the intermediate hits.
struct CompositeReturn {
  ReturnSample sample;
  std::vector<SectionPoint> path;  // z, intermediate hits, image
  Mat2 jacobian = Mat2::Identity();
  bool jacobian_ok = false;
};

CompositeReturn composite_return(const ReturnSystem& system, const SectionPoint& z, double t_min,
                                 bool with_jacobian = true);

struct StableDirection {
  Vec2 direction = Vec2::Zero();  // unit, chart coordinates
  double contraction = 0.0;       // smallest singular value of the composed derivative
  int returns = 0;
};

/// Most contracted right singular direction of DR^n(z), n <= n_iters.
StableDirection estimate_stable_direction(const ReturnSystem& system, const SectionPoint& z,
                                          int n_iters);

struct LeafContraction {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int pairs = 0;
  int rejected = 0;
};

/// d(R y, R z) / d(y, z) for pairs on common stable leaves. Base leaves come
/// from attractor hits; the partner is displaced along u by up to `spread`.
LeafContraction leaf_contraction(const ReturnSystem& system, const std::vector<SectionPoint>& hits,
                                 int pairs, double spread = 0.05, std::uint64_t seed = 1);

struct ConeOptions {
  double rho = 0.2;
  int samples = 1000;   // base points; two unit vectors each
  double t2 = 1.0;      // minimum flight time of the composite return
  std::uint64_t seed = 1;
  int burn = 20;
};

struct ConeReport {
  double rho = 0.0;
  double t2 = 0.0;
  double max_width = 0.0;
  double min_expansion = 0.0;
  int vectors = 0;
  int rejected = 0;
};

/// Unstable cones are centered on the chart's v-axis (the cu direction):
/// C(rho) = {a ev + b eu : |b| |eu| <= rho |a| |ev|}.
ConeReport cone_check(const ReturnSystem& system, const ConeOptions& opt);

struct ConeCalibration {
  bool found = false;
  double t2 = 0.0;
  double lambda = 1.0 / 3.0;
  std::vector<ConeReport> reports;  // one per tried candidate, in order
};

/// Smallest candidate t2 for which the image cone has width <= rho/2 and the
/// minimal expansion is >= (5/6)/lambda.
ConeCalibration calibrate_t2(const ReturnSystem& system, const ConeOptions& base,
                             const std::vector<double>& candidates, double lambda = 1.0 / 3.0);

/// Fitted rate c of min_expansion ~ exp(c t2) over the given reports.
double expansion_rate(const std::vector<ConeReport>& reports);

struct PeriodicOrbit {
  SectionPoint point;
  double period = 0.0;
  int returns = 0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton refinement of a fixed point of the `returns`-fold next-hit map.
PeriodicOrbit refine_periodic_orbit(const ReturnSystem& system, const SectionPoint& guess,
                                    int returns, double tol = 1e-11, int max_iter = 40);

struct ReturnTimeStats {
  double mean = 0.0;
  double stderr_ = 0.0;
  int samples = 0;
  int holes = 0;
};

/// Mean first-return time over Lebesgue-random section points.
ReturnTimeStats mean_return_time(const ReturnSystem& system, int samples, std::uint64_t seed = 1);

/// Two ingoing Lorenz sections in the plane z = r - 1 (downward crossings),
/// one around each of the two parallel hit segments, with leaf direction
/// aligned to the estimated stable direction. Leaf intervals are [0, 1] for
/// the segment with larger mean x and [-1, 0] for the other.
std::vector<CrossSection> lorenz_sections(const FlowSystem& lorenz, double tol = 1e-10);

// --- quotient map ---------------------------------------------------------

struct QuotientOptions {
  std::vector<double> cu_edge;  // u of the transversal line per section (default 1/2)
  int grid_n = 2000;            // grid cells per section
  double straddle = 1e-8;       // bisection width at branch boundaries
  double jump_fraction = 0.25;  // jump (fraction of |I|) that marks a boundary
  double t_min = 0.0;
};

struct ReturnRow {
  int branch = 0;
  double x = 0.0;
  double f_x = 0.0;
  double tau = 0.0;
  int r = 0;
};

struct QuotientResult {
  BranchMap1D map;
  std::vector<ReturnRow> table;
  std::vector<double> gamma0;      // including the ends of each I_Sigma
  std::vector<double> holes;       // grid cells without a return
  std::vector<double> boundary_exponents;  // fitted exponent at each interior boundary side
  double min_abs_derivative = 0.0;  // secant slopes over interior knots
  double max_tau_near_boundary = 0.0;
};

QuotientResult quotient_map(const ReturnSystem& system, const QuotientOptions& opt = {});

/// Exponent a of |F(g + 2d) - F(g + d)| ~ d^a, F the quotient evaluated by
/// actual returns along the cu edge, on side = +1 or -1 of g.
double local_exponent(const ReturnSystem& system, int section, double u0, double g, int side,
                      double d_min = 1e-5, double d_max = 1e-2, int points = 12);

void write_return_table_csv(std::ostream& os, const std::vector<ReturnRow>& table);

}  // namespace shlab
