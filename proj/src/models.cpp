#include "shlab/models.hpp"

#include <cmath>
#include <limits>

namespace shlab {

FlowSystem lorenz_field(double sigma, double r, double b) {
  require(sigma > 0 && r > 0 && b > 0, "Lorenz parameters must be positive");
  auto rhs = [=](const Vec3& x) {
    return Vec3(sigma * (x[1] - x[0]), x[0] * (r - x[2]) - x[1], x[0] * x[1] - b * x[2]);
  };
  auto jac = [=](const Vec3& x) {
    Mat3 j;
    j << -sigma, sigma, 0.0,
         r - x[2], -1.0, -x[0],
         x[1], x[0], -b;
    return j;
  };
  std::vector<Vec3> eq{Vec3::Zero()};
  if (r > 1) {
    const double c = std::sqrt(b * (r - 1));
    eq.emplace_back(c, c, r - 1);
    eq.emplace_back(-c, -c, r - 1);
  }
  // Every orbit enters and stays in this ball (the classical estimate
  // R^2 = b^2 (sigma + r)^2 / (4 (b - 1)) for b > 1, doubled for slack).
  TrappingBall ball;
  ball.center = Vec3(0.0, 0.0, sigma + r);
  const double bb = std::max(b, 2.0);
  ball.radius = 2.0 * std::sqrt(bb * bb * (sigma + r) * (sigma + r) / (4.0 * (bb - 1.0)));
  return FlowSystem("lorenz", {{"sigma", sigma}, {"r", r}, {"b", b}}, rhs, jac, eq, ball);
}

bool LorenzLikeEigenvalues::valid() const noexcept {
  return lambda1 > 0 && 0 > lambda2 && lambda2 > lambda3 && lambda1 + lambda2 > 0;
}

void LorenzLikeEigenvalues::validate() const {
  if (!(lambda1 > 0)) throw ValidationError("Lorenz-like spectrum needs lambda1 > 0");
  if (!(lambda2 < 0 && lambda2 > lambda3))
    throw ValidationError("Lorenz-like spectrum needs 0 > lambda2 > lambda3");
  if (!(lambda1 + lambda2 > 0)) throw ValidationError("Lorenz-like spectrum needs lambda1 + lambda2 > 0");
}

Crossing singularity_crossing_map(const LorenzLikeEigenvalues& eig, double x1, double x2) {
  eig.validate();
  if (x1 <= 0.0) return {true, 0.0, 0.0};
  require(x1 <= 1.0, "x1 must not exceed the (unit) section half-width");
  Crossing c;
  c.y2 = x2 * std::pow(x1, -eig.lambda3 / eig.lambda1);
  c.y3 = std::pow(x1, -eig.lambda2 / eig.lambda1);
  return c;
}

double exit_time(double lambda1, double x1) {
  require(lambda1 > 0, "lambda1 must be positive");
  if (x1 <= 0.0) return std::numeric_limits<double>::infinity();
  require(x1 <= 1.0, "x1 must lie in (0, 1]");
  return -std::log(x1) / lambda1;
}

FlowSystem lorenz_like_saddle(const LorenzLikeEigenvalues& eig) {
  eig.validate();
  const double l1 = eig.lambda1, l2 = eig.lambda2, l3 = eig.lambda3;
  auto rhs = [=](const Vec3& x) { return Vec3(l1 * x[0], l3 * x[1], l2 * x[2]); };
  auto jac = [=](const Vec3&) {
    Mat3 j = Mat3::Zero();
    j(0, 0) = l1;
    j(1, 1) = l3;
    j(2, 2) = l2;
    return j;
  };
  return FlowSystem("lorenz-like-saddle", {{"lambda1", l1}, {"lambda2", l2}, {"lambda3", l3}}, rhs,
                    jac, {Vec3::Zero()});
}

void GeometricLorenzSpec::validate() const {
  eigenvalues.validate();
  require(mu > 1.0 && mu <= 2.0, "geometric Lorenz gain mu must lie in (1, 2]");
  require(mu * eigenvalues.beta() >= 1.0, "mu * beta must be at least 1");
  require(transit_time > 0, "transit_time must be positive");
  require(leaf_gain > 0 && leaf_gain <= 0.5, "leaf_gain must lie in (0, 1/2]");
  require(std::abs(fold_offset) + leaf_gain < 1.0, "returning sheets must stay inside the section");
}

BranchMap1D geometric_lorenz_map(const GeometricLorenzSpec& spec) {
  spec.validate();
  const double mu = spec.mu, beta = spec.eigenvalues.beta();
  std::vector<Branch> br;
  br.push_back({{-1.0, 0.0},
                [=](double x) { return 1.0 - mu * std::pow(-x, beta); },
                [=](double x) { return mu * beta * std::pow(-x, beta - 1.0); },
                [=](double y) { return -std::pow((1.0 - y) / mu, 1.0 / beta); }});
  br.push_back({{0.0, 1.0},
                [=](double x) { return mu * std::pow(x, beta) - 1.0; },
                [=](double x) { return mu * beta * std::pow(x, beta - 1.0); },
                [=](double y) { return std::pow((y + 1.0) / mu, 1.0 / beta); }});
  const PowerLaw pl{std::max(2.0, 2.0 * mu * beta), beta};
  return BranchMap1D("geometric-lorenz", {-1.0, 1.0}, std::move(br), {-1.0, 0.0, 1.0}, pl);
}

}  // namespace shlab
