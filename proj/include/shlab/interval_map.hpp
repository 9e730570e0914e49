#pragma once

#include "shlab/common.hpp"
#include "shlab/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace shlab {

/// One monotone C^1 piece of an interval map. `inverse` is optional; when it
/// is empty, inverse images are found by bisection.
struct Branch {
  Interval domain;
  std::function<double(double)> map;
  std::function<double(double)> derivative;
  std::function<double(double)> inverse;

  // Filled in by BranchMap1D.
  bool increasing = true;
  Interval image{};
};

/// Declared power-law behaviour near the singular set:
/// (1/B) d^beta <= |f'| <= B d^-beta.
struct PowerLaw {
  double B = 1.0;
  double beta = 0.5;
};

/// Maps whose typical orbits cannot be followed in binary floating point
/// (every double is dyadic and collapses onto 0). Their orbits are produced
/// from an exact binary expansion with a random tail instead.
enum class DigitDynamics { none, doubling, tent };

struct MapVerification {
  double min_abs_derivative = 0.0;
  bool expanding = false;
  bool power_law_ok = true;
  double worst_power_law_ratio = 0.0;
};

/// Piecewise expanding interval map with a finite singular set.
class BranchMap1D {
 public:
  BranchMap1D(std::string name, Interval domain, std::vector<Branch> branches,
              std::vector<double> singular_set, std::optional<PowerLaw> power_law = std::nullopt,
              DigitDynamics digits = DigitDynamics::none);

  const std::string& name() const { return name_; }
  const Interval& domain() const { return domain_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<double>& singular_set() const { return singular_; }
  const std::optional<PowerLaw>& power_law() const { return power_law_; }
  DigitDynamics digits() const { return digits_; }

  /// Index of the branch whose half-open domain [lo, hi) holds x.
  std::optional<std::size_t> branch_of(double x) const;
  double operator()(double x) const;
  double derivative(double x) const;
  /// Preimage of y under branch i, clamped to the branch domain.
  double inverse(std::size_t i, double y) const;

  /// d(x, Gamma0); +infinity when the singular set is empty.
  double distance_to_singular(double x) const;
  /// d(x, Gamma0) when below delta, 1 otherwise.
  double truncated_distance(double x, double delta) const;
  bool is_singular(double x) const { return distance_to_singular(x) == 0.0; }

  MapVerification verify(int grid = 4096, double margin = 1e-6) const;
  /// Shortest branch length.
  double shortest_branch() const;

 private:
  std::string name_;
  Interval domain_;
  std::vector<Branch> branches_;
  std::vector<double> singular_;
  std::optional<PowerLaw> power_law_;
  DigitDynamics digits_;
};

/// Forward orbit of one point. For digit maps the point carries an infinite
/// random binary tail (drawn from `seed`) so that it is Lebesgue-typical.
class Orbit1D {
 public:
  Orbit1D(const BranchMap1D& map, double x0, std::uint64_t seed = 0);
  /// Lebesgue-random starting point.
  static Orbit1D random(const BranchMap1D& map, Rng& rng);

  double value() const { return x_; }
  /// False once the orbit has hit the singular set or left the domain.
  bool defined() const { return defined_; }
  bool step();
  const BranchMap1D& map() const { return *map_; }

 private:
  void refresh_value();
  int next_bit();

  const BranchMap1D* map_;
  double x_;
  bool defined_ = true;
  std::uint64_t word_ = 0;
  std::uint64_t bit_state_ = 0;
  std::uint64_t bit_buffer_ = 0;
  int bits_left_ = 0;
  int flip_ = 0;
};

/// n successive points x_0 .. x_{n-1}; shorter if the orbit becomes undefined.
std::vector<double> orbit_points(const BranchMap1D& map, double x0, std::size_t n,
                                 std::uint64_t seed = 0);

BranchMap1D doubling_map();
BranchMap1D tent_map();
/// Full-branch piecewise-linear map on [offset, offset + sum(lengths)) whose
/// i-th branch stretches an interval of the given length onto the whole range.
BranchMap1D full_branch_linear(const std::vector<double>& lengths, double offset = 0.0);
/// Two decoupled full-branch systems on [0, 1) and [1, 3): Lebesgue measure
/// restricted to either part is invariant and ergodic.
BranchMap1D glued_two_component_map();

}  // namespace shlab
