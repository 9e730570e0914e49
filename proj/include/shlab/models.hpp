#pragma once

#include "shlab/common.hpp"
#include "shlab/flow.hpp"
#include "shlab/interval_map.hpp"

namespace shlab {

/// Classical Lorenz equations with their three equilibria and the standard
/// trapping ball centered at (0, 0, sigma + r).
FlowSystem lorenz_field(double sigma = 10.0, double r = 28.0, double b = 8.0 / 3.0);

/// Real spectrum of a Lorenz-like singularity: l1 > 0 > l2 > l3, l1 + l2 > 0.
struct LorenzLikeEigenvalues {
  double lambda1 = 1.0;
  double lambda2 = -0.52;
  double lambda3 = -2.0;

  /// Throws ValidationError when any Lorenz-like inequality fails.
  void validate() const;
  bool valid() const noexcept;
  /// Singular exponent -lambda2/lambda1 of the crossing map.
  double beta() const { return -lambda2 / lambda1; }
  /// Contraction exponent -lambda3/lambda1 of the strong-stable coordinate.
  double strong_exponent() const { return -lambda3 / lambda1; }
};

/// Result of crossing the linearized flow box from the ingoing section
/// {x3 = 1} to the outgoing section {|x1| = 1}. A nonpositive x1 lies on the
/// local stable manifold: the orbit never leaves the box.
struct Crossing {
  bool on_stable_manifold = false;
  double y2 = 0.0;  // strong-stable coordinate at exit
  double y3 = 0.0;  // weak-stable coordinate at exit, equals x1^beta
};

Crossing singularity_crossing_map(const LorenzLikeEigenvalues& eig, double x1, double x2);

/// Time to leave the unit flow box from height x1: -log(x1)/lambda1.
/// Returns +infinity for x1 <= 0.
double exit_time(double lambda1, double x1);

/// Linear saddle x1' = l1 x1, x2' = l3 x2, x3' = l2 x3 (x1 unstable, x2
/// strong-stable, x3 weak-stable) with the origin as its only equilibrium.
FlowSystem lorenz_like_saddle(const LorenzLikeEigenvalues& eig);

struct GeometricLorenzSpec {
  LorenzLikeEigenvalues eigenvalues{};
  double mu = 1.95;           // branch gain, in (1, 2]
  double transit_time = 1.0;  // flight time outside the box
  double fold_offset = 0.5;   // strong-stable position of the returning sheets
  double leaf_gain = 0.05;    // strong-stable gain of the return transit

  void validate() const;
};

/// One-dimensional quotient f(x) = sign(x)(mu |x|^beta - 1) on [-1, 1] with
/// singular set {-1, 0, 1}.
BranchMap1D geometric_lorenz_map(const GeometricLorenzSpec& spec);

}  // namespace shlab
