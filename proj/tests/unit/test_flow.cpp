#include "doctest.h"

#include "shlab/flow.hpp"
#include "shlab/models.hpp"
#include "shlab/rng.hpp"

#include <Eigen/QR>

#include <cmath>

using namespace shlab;

namespace {

FlowSystem diagonal_field(double a, double b, double c) {
  return FlowSystem(
      "diag", {}, [=](const Vec3& x) { return Vec3(a * x[0], -b * x[1], -c * x[2]); },
      [=](const Vec3&) {
        Mat3 j = Mat3::Zero();
        j.diagonal() << a, -b, -c;
        return j;
      },
      {Vec3::Zero()});
}

// Independent oracle: classical fixed-step RK4.
Vec3 rk4(const FlowSystem& s, Vec3 x, double T, int steps) {
  const double h = T / steps;
  for (int i = 0; i < steps; ++i) {
    const Vec3 k1 = s.rhs(x);
    const Vec3 k2 = s.rhs(x + 0.5 * h * k1);
    const Vec3 k3 = s.rhs(x + 0.5 * h * k2);
    const Vec3 k4 = s.rhs(x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v(uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng) - 0.5);
  return v.normalized();
}

}  // namespace

TEST_CASE("linear field has the exact exponential solution") {
  const auto sys = diagonal_field(0.7, 0.3, 1.9);
  const auto traj = flow(sys, Vec3(1, 1, 1), 1.0, 1e-10);
  const Vec3 x = traj.back();
  CHECK(x[0] == doctest::Approx(std::exp(0.7)).epsilon(1e-8));
  CHECK(x[1] == doctest::Approx(std::exp(-0.3)).epsilon(1e-8));
  CHECK(x[2] == doctest::Approx(std::exp(-1.9)).epsilon(1e-8));
  // Dense output inside the span.
  const Vec3 mid = traj.at(0.37);
  CHECK(mid[0] == doctest::Approx(std::exp(0.7 * 0.37)).epsilon(1e-8));
  CHECK(traj.interpolation_order() >= 3);
}

TEST_CASE("Lorenz origin is an equilibrium of the flow") {
  const auto lor = lorenz_field();
  CHECK(flow_to(lor, Vec3::Zero(), 5.0).norm() == 0.0);
}

TEST_CASE("Lorenz T=1 matches a fine fixed-step RK4 oracle") {
  const auto lor = lorenz_field();
  const Vec3 x = flow_to(lor, Vec3(1, 1, 1), 1.0, 1e-11);
  const Vec3 oracle = rk4(lor, Vec3(1, 1, 1), 1.0, 200000);
  CHECK((x - oracle).norm() < 1e-5);
  const Vec3 loose = flow_to(lor, Vec3(1, 1, 1), 1.0, 1e-9);
  CHECK((loose - oracle).norm() < 1e-5);
}

TEST_CASE("flow property X(s+t) = X(t) o X(s)") {
  const auto lor = lorenz_field();
  Rng rng(11);
  const double tol = 1e-10;
  for (int k = 0; k < 10; ++k) {
    const Vec3 x0(20 * uniform01(rng) - 10, 20 * uniform01(rng) - 10, 30 * uniform01(rng) + 5);
    const double s = 0.6 * uniform01(rng), t = 0.6 * uniform01(rng);
    const Vec3 direct = flow_to(lor, x0, s + t, tol);
    const Vec3 composed = flow_to(lor, flow_to(lor, x0, s, tol), t, tol);
    CHECK((direct - composed).norm() <= 10 * tol * std::max(1.0, direct.norm()) * 10);
  }
}

TEST_CASE("flow rejects degenerate durations and tolerances") {
  const auto lor = lorenz_field();
  CHECK_THROWS_AS(flow(lor, Vec3(1, 1, 1), 0.0), ValidationError);
  CHECK_THROWS_AS(flow(lor, Vec3(1, 1, 1), 1.0, 1e-2), ValidationError);
}

TEST_CASE("finite-time blow-up raises a divergence error with the last valid time") {
  FlowSystem blow("blowup", {}, [](const Vec3& x) { return Vec3(x[0] * x[0], 0, 0); },
                  [](const Vec3& x) {
                    Mat3 j = Mat3::Zero();
                    j(0, 0) = 2 * x[0];
                    return j;
                  },
                  {});
  try {
    flow(blow, Vec3(1, 0, 0), 2.0);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_valid_time() < 1.0);
    CHECK(e.last_valid_time() > 0.99);
  }
}

TEST_CASE("tangent flow of the field direction is the field at the image") {
  const auto lor = lorenz_field();
  const Vec3 x0(1, 2, 20);
  const Vec3 v = tangent_flow(lor, x0, lor.rhs(x0), 0.8);
  const Vec3 expected = lor.rhs(flow_to(lor, x0, 0.8, 1e-11));
  CHECK((v - expected).norm() / expected.norm() < 1e-5);
}

TEST_CASE("tangent flow of a linear field is exp(AT) v") {
  const auto sys = diagonal_field(0.4, 1.1, 2.0);
  const Vec3 v = tangent_flow(sys, Vec3(1, 0.5, -0.2), Vec3(1, 2, 3), 1.5);
  CHECK(v[0] == doctest::Approx(std::exp(0.6)).epsilon(1e-8));
  CHECK(v[1] == doctest::Approx(2 * std::exp(-1.65)).epsilon(1e-8));
  CHECK(v[2] == doctest::Approx(3 * std::exp(-3.0)).epsilon(1e-8));
}

TEST_CASE("tangent flow agrees with finite differences on 100 random cases") {
  const auto lor = lorenz_field();
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec3 x0(30 * uniform01(rng) - 15, 40 * uniform01(rng) - 20, 35 * uniform01(rng) + 5);
    const Vec3 v0 = random_unit(rng);
    const double T = k == 0 ? 0.5 : 0.05 + 0.95 * uniform01(rng);
    const Vec3 v = tangent_flow(lor, x0, v0, T);
    const double eps = 1e-6;
    const Vec3 fd = (flow_to(lor, x0 + eps * v0, T, 1e-12) - flow_to(lor, x0 - eps * v0, T, 1e-12)) /
                    (2 * eps);
    worst = std::max(worst, (v - fd).norm() / v.norm());
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("cu area growth: exact determinant, identity time, degeneracy") {
  const auto sys = diagonal_field(0.9, 0.4, 3.0);
  CHECK(cu_area_growth(sys, Vec3(1, 1, 1), Vec3::UnitX(), Vec3::UnitY(), 1.0) ==
        doctest::Approx(0.5).epsilon(1e-8));
  const auto lor = lorenz_field();
  const Vec3 x0(2, 3, 25);
  CHECK(cu_area_growth(lor, x0, lor.rhs(x0), Vec3(0, 0, 1), 0.0) == 0.0);
  CHECK_THROWS_AS(cu_area_growth(lor, x0, Vec3(1, 0, 0), Vec3(1, 1e-10, 0), 1.0), ValidationError);
}

TEST_CASE("cu area growth on Lorenz matches the QR product of the two leading factors") {
  const auto lor = lorenz_field();
  const Vec3 x0 = flow_to(lor, Vec3(1, 1, 1), 30.0);
  const Vec3 a = lor.rhs(x0).normalized();
  const Vec3 b = a.cross(Vec3(0.3, -0.5, 0.8)).normalized();
  const double g = cu_area_growth(lor, x0, a, b, 2.0);
  CHECK(g > 0.0);
  const auto [end, m] = flow_with_jacobian(lor, x0, 2.0, 1e-11);
  Mat3 frame;
  frame << a, b, a.cross(b).normalized();
  Eigen::HouseholderQR<Mat3> qr(m * frame);
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  const double qr_log = std::log(std::abs(r(0, 0)) * std::abs(r(1, 1)));
  CHECK(std::abs(g - qr_log) < 1e-2);
}

TEST_CASE("QR exponents of a linear field are its eigenvalues") {
  const auto sys = diagonal_field(0.5, 0.8, 2.5);
  LyapunovOptions opt;
  opt.transient = 0.0;
  const auto res = qr_lyapunov(sys, Vec3(0.1, 0.1, 0.1), 10.0, opt);
  CHECK(res.exponents[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(res.exponents[1] == doctest::Approx(-0.8).epsilon(1e-3));
  CHECK(res.exponents[2] == doctest::Approx(-2.5).epsilon(1e-3));
}

TEST_CASE("Lorenz QR spectrum: zero middle exponent, step-halving self-consistency") {
  const auto lor = lorenz_field();
  const Vec3 x0(1, 1, 1);
  const auto a = qr_lyapunov(lor, x0, 2000.0);
  LyapunovOptions half;
  half.renorm_step = 0.25;
  const auto b = qr_lyapunov(lor, x0, 2000.0, half);
  CHECK(a.exponents[0] > 0.0);
  CHECK(std::abs(a.exponents[1]) < 5e-3);
  CHECK(a.exponents[2] < 0.0);
  CHECK(std::abs(a.exponents[0] - b.exponents[0]) / a.exponents[0] < 0.02);
  const double sum = a.exponents[0] + a.exponents[1] + a.exponents[2];
  CHECK(std::abs(sum - (-(10.0 + 1.0 + 8.0 / 3.0))) / (10.0 + 1.0 + 8.0 / 3.0) < 0.01);
  CHECK(a.mean_divergence == doctest::Approx(-(10.0 + 1.0 + 8.0 / 3.0)).epsilon(1e-9));
  CHECK(!a.history.empty());
}

TEST_CASE("Lorenz escape is reported against the trapping ball") {
  const auto lor = lorenz_field();
  REQUIRE(lor.trapping().has_value());
  CHECK(lor.trapping()->contains(flow_to(lor, Vec3(1, 1, 1), 50.0)));
}

TEST_CASE("dominated splitting witness has a negative rate on the attractor") {
  const auto lor = lorenz_field();
  const double rate = domination_rate(lor, Vec3(1, 1, 1), {0.5, 1.0, 1.5, 2.0}, 6);
  CHECK(rate < 0.0);
}
