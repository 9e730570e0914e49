#pragma once

#include "shlab/common.hpp"
#include "shlab/ode.hpp"

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shlab {

struct Equilibrium {
  Vec3 point;
  std::array<std::complex<double>, 3> eigenvalues;  // sorted by descending real part
};

/// Ball outside of which an orbit counts as escaped.
struct TrappingBall {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;

  bool contains(const Vec3& x) const { return (x - center).norm() <= radius; }
};

/// Smooth 3D vector field with analytic Jacobian. Immutable after
/// construction; equilibrium spectra are computed once.
class FlowSystem {
 public:
  using Field = std::function<Vec3(const Vec3&)>;
  using Jacobian = std::function<Mat3(const Vec3&)>;

  FlowSystem(std::string name, std::map<std::string, double> params, Field rhs,
             Jacobian jacobian, const std::vector<Vec3>& equilibria,
             std::optional<TrappingBall> trapping = std::nullopt);

  const std::string& name() const { return name_; }
  const std::map<std::string, double>& params() const { return params_; }
  double param(const std::string& key) const;

  Vec3 rhs(const Vec3& x) const { return rhs_(x); }
  Mat3 jacobian(const Vec3& x) const { return jacobian_(x); }
  double divergence(const Vec3& x) const { return jacobian_(x).trace(); }

  const std::vector<Equilibrium>& equilibria() const { return equilibria_; }
  const std::optional<TrappingBall>& trapping() const { return trapping_; }

  /// Largest relative deviation of the analytic Jacobian from central
  /// differences of rhs over the given states.
  double jacobian_consistency(const std::vector<Vec3>& states, double h = 1e-6) const;

 private:
  std::string name_;
  std::map<std::string, double> params_;
  Field rhs_;
  Jacobian jacobian_;
  std::vector<Equilibrium> equilibria_;
  std::optional<TrappingBall> trapping_;
};

std::array<std::complex<double>, 3> sorted_eigenvalues(const Mat3& a);

struct FlowOptions {
  double tol = 1e-9;
  double h_max = 0.1;
};

/// Piecewise-polynomial orbit: one dense-output segment per accepted step.
class Trajectory {
 public:
  struct Segment {
    double t0, t1;
    Vec3 c1, c2, c3, c4, c5;
  };

  Trajectory() = default;
  Trajectory(std::vector<Segment> segments, double tol)
      : segments_(std::move(segments)), tol_(tol) {}

  double t_begin() const { return segments_.empty() ? 0.0 : segments_.front().t0; }
  double t_end() const { return segments_.empty() ? 0.0 : segments_.back().t1; }
  std::size_t size() const { return segments_.size(); }
  int interpolation_order() const { return 4; }
  double tolerance() const { return tol_; }

  Vec3 at(double t) const;
  Vec3 front() const { return segments_.front().c1; }
  Vec3 back() const { return at(t_end()); }
  std::vector<double> step_times() const;
  /// States on a uniform grid t_begin + k*dt, k = 0..floor(span/dt).
  std::vector<Vec3> sample(double dt) const;

 private:
  std::vector<Segment> segments_;
  double tol_ = 0.0;
};

Trajectory flow(const FlowSystem& system, const Vec3& x0, double T, double tol = 1e-9);

/// End state of the orbit only (no segment storage).
Vec3 flow_to(const FlowSystem& system, const Vec3& x0, double T, double tol = 1e-9);

/// Calls observer(t, x) on the grid t = k*dt in [0, T] using dense output.
void sample_orbit(const FlowSystem& system, const Vec3& x0, double T, double dt,
                  const std::function<void(double, const Vec3&)>& observer,
                  double tol = 1e-9);

/// Solution of the variational equation v' = DX(x(t)) v at time T.
Vec3 tangent_flow(const FlowSystem& system, const Vec3& x0, const Vec3& v0, double T,
                  double tol = 1e-10);

/// Fundamental matrix DX_T(x0) together with X_T(x0).
std::pair<Vec3, Mat3> flow_with_jacobian(const FlowSystem& system, const Vec3& x0, double T,
                                         double tol = 1e-10);

/// Log of the area-growth factor of the parallelogram spanned by the plane
/// vectors under DX_T.
double cu_area_growth(const FlowSystem& system, const Vec3& x0, const Vec3& a, const Vec3& b,
                      double T, double tol = 1e-10);

struct LyapunovOptions {
  double renorm_step = 0.5;
  double transient = 20.0;  // discarded spin-up before averaging
  double tol = 1e-9;
  int checkpoints = 8;      // convergence diagnostics
};

struct LyapunovResult {
  std::array<double, 3> exponents{};  // descending
  double averaging_time = 0.0;
  Vec3 end_state = Vec3::Zero();
  /// Running estimates at evenly spaced checkpoints (time, exponents).
  std::vector<std::pair<double, std::array<double, 3>>> history;
  /// Orbit average of the Jacobian trace over the averaging window.
  double mean_divergence = 0.0;
};

/// Benettin-style QR exponents. Throws EscapeError if the system declares a
/// trapping ball and the orbit leaves it.
LyapunovResult qr_lyapunov(const FlowSystem& system, const Vec3& x0, double T,
                           const LyapunovOptions& opt = {});

/// Per-unit-step tangent record used by the Entropy-Formula estimators.
struct TangentStep {
  Vec3 x;      // base point at the start of the step
  Mat3 jac;    // DX_dt(x)
  Mat3 frame;  // orthonormal QR frame at the start of the step (column 0 = top)
};

/// Runs the QR scheme with step dt after a transient and hands every step's
/// one-step Jacobian to the visitor. Returns the QR exponents.
LyapunovResult tangent_walk(const FlowSystem& system, const Vec3& x0, double T, double dt,
                            double transient, const std::function<void(const TangentStep&)>& visit,
                            double tol = 1e-9);

/// Dominated-splitting witness: for orbit segments of length `window`,
/// log of (contraction of the most-contracted direction) times (inverse of
/// the cu-area growth) sampled at several window lengths; returns the
/// fitted slope per unit time (negative means domination).
double domination_rate(const FlowSystem& system, const Vec3& x0, const std::vector<double>& windows,
                       int segments, double tol = 1e-9);

}  // namespace shlab
