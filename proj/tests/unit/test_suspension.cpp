#include "doctest.h"

#include "shlab/models.hpp"
#include "shlab/suspension.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace shlab;

TEST_CASE("semiflow: no crossing, constant roof arithmetic") {
  const auto d = doubling_map();
  const Suspension sus(d, constant_roof(1.0));
  const auto a = sus.flow({0.3, 0.2}, 0.5);
  CHECK(a.point.x == 0.3);
  CHECK(a.point.s == doctest::Approx(0.7));
  CHECK(a.roof_crossings == 0);
  const auto b = sus.flow({0.3, 0.0}, 3.5);
  CHECK(b.point.x == doctest::Approx(d(d(d(0.3)))));
  CHECK(b.point.s == doctest::Approx(0.5));
  CHECK(b.roof_crossings == 3);
}

TEST_CASE("semiflow over the geometric base: heights in range, semigroup law") {
  const GeometricLorenzSpec sp;
  const auto f = geometric_lorenz_map(sp);
  const Suspension sus(f, exit_time_roof(sp));
  Rng rng(9);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const double x = -1 + 2 * uniform01(rng);
    const SuspensionPoint p{x, uniform01(rng) * sus.roof().tau(x)};
    const double a = 10 * uniform01(rng), b = 10 * uniform01(rng);
    const auto ab = sus.flow(p, a + b);
    const auto first = sus.flow(p, a);
    if (ab.terminated || first.terminated) continue;
    const auto two = sus.flow(first.point, b);
    if (two.terminated) continue;
    CHECK(ab.point.s >= 0.0);
    CHECK(ab.point.s < sus.roof().tau(ab.point.x));
    CHECK(ab.point.x == two.point.x);
    CHECK(std::abs(ab.point.s - two.point.s) < 1e-12 * std::max(1.0, a + b));
    ++checked;
  }
  CHECK(checked > 450);
  // A base point on Gamma terminates with the remaining time reported.
  const auto t = sus.flow({1.0, 0.0}, 5.0);
  CHECK(t.terminated);
  CHECK(t.remaining == doctest::Approx(5.0 - sp.transit_time));
  CHECK_FALSE(sus.flow({0.5, 0.0}, 1e3).terminated);
}

TEST_CASE("lifted measure: constant roof identities") {
  const auto d = doubling_map();
  const auto m = lift_orbit_measure(d, constant_roof(1.0), 0.3, 20000, 4);
  CHECK(m.evaluate([](double, double) { return 1.0; }).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.evaluate([](double, double s) { return s; }).value == doctest::Approx(0.5).epsilon(1e-12));
  const auto g = [](double x) { return std::sin(5 * x) + x * x; };
  const auto pts = orbit_points(d, 0.3, 21000, 4);
  double mf = 0.0;
  for (std::size_t i = 1000; i < pts.size(); ++i) mf += g(pts[i]);
  mf /= 20000;
  CHECK(m.evaluate([&](double x, double) { return g(x); }).value == doctest::Approx(mf).epsilon(1e-10));
}

TEST_CASE("lifted measure matches a dense double quadrature") {
  const auto d = doubling_map();
  RoofFunction roof{"1+x", [](double x) { return 1 + x; }, 1.0};
  const auto phi = [](double, double s) { return s < 0.5 ? 1.0 : 0.0; };
  // Independent oracle: 2000 x 4000 tensor midpoint grid on [0,1) x [0,2).
  double num = 0.0, den = 0.0;
  const int nx = 2000, ns = 4000;
  for (int i = 0; i < nx; ++i) {
    const double x = (i + 0.5) / nx;
    den += (1 + x) / nx;
    for (int j = 0; j < ns; ++j) {
      const double s = 2.0 * (j + 0.5) / ns;
      if (s < 1 + x) num += phi(x, s) * (2.0 / ns) / nx;
    }
  }
  const double oracle = num / den;
  // mu_F = Lebesgue as an equal-weight midpoint sample.
  std::vector<double> xs(20000);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (i + 0.5) / xs.size();
  LiftOptions o;
  o.nodes_per_unit = 2048;
  const LiftedMeasure m(xs, {}, roof, o);
  CHECK(std::abs(m.evaluate(phi).value - oracle) < 1e-4);
  CHECK(std::abs(oracle - 1.0 / 3.0) < 1e-3);
}

TEST_CASE("lifted measure excludes infinite roofs and reports truncation") {
  const GeometricLorenzSpec sp;
  const auto roof = exit_time_roof(sp);
  const LiftedMeasure m({0.0, 0.5, -0.25, 1e-30}, {}, roof);
  CHECK(m.excluded() == 1);
  CHECK(m.size() == 3);
  CHECK(m.truncated_mass() > 0.0);
}

TEST_CASE("invariance of the lifted measure under the semiflow") {
  const auto d = doubling_map();
  const Suspension sus(d, constant_roof(1.0));
  const auto phis = trig_observables(20, 5);
  const auto big = lift_orbit_measure(d, sus.roof(), 0.3, 100000, 7);
  const double dev = invariance_test(big, sus, phis, {0.3});
  CHECK(dev < 2e-3);
  CHECK(invariance_test(big, sus, phis, {0.0}) == 0.0);

  // Orbit samples are invariant up to a telescoping term; i.i.d. Lebesgue
  // samples show the Monte-Carlo rate: deviation halves per factor 4.
  auto iid_dev = [&](std::size_t n) {
    double acc = 0.0;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Rng rng(seed);
      std::vector<double> xs(n);
      for (auto& x : xs) x = uniform01(rng);
      acc += invariance_test(LiftedMeasure(xs, {}, sus.roof()), sus, phis, {0.3});
    }
    return acc / 6;
  };
  const double d1 = iid_dev(4000), d4 = iid_dev(16000);
  MESSAGE("iid deviation " << d1 << " -> " << d4 << ", orbit " << dev);
  CHECK(d1 / d4 > 1.4);
  CHECK(d1 / d4 < 2.9);
}

TEST_CASE("quotient-measure brackets") {
  const auto f = geometric_lorenz_map(GeometricLorenzSpec{});
  const auto xs = orbit_points(f, 0.3, 5000, 1);
  const std::vector<double> base(xs.begin() + 1000, xs.end());

  const auto flat = quotient_measure_bracket(f, base, [](double) { return 2.5; }, 6);
  for (const auto& b : flat.brackets) {
    CHECK(b.lo == doctest::Approx(2.5));
    CHECK(b.width() == 0.0);
  }
  const auto single = quotient_measure_bracket(f, base, [](double x) { return x * x; }, 6);
  for (const auto& b : single.brackets) {
    CHECK(b.width() == 0.0);
    CHECK(std::abs(b.lo - single.brackets[0].lo) < 1e-2);
  }

  const GeometricLorenzFlow g;
  std::vector<double> sub;
  for (std::size_t i = 0; i < base.size(); i += 20) sub.push_back(base[i]);
  const auto constant =
      quotient_measure_bracket(g, 0, sub, [](const SectionPoint&) { return 1.0; }, 3);
  for (const auto& b : constant.brackets) CHECK(b.width() == 0.0);
  const auto u = quotient_measure_bracket(g, 0, sub, [](const SectionPoint& z) { return z.uv[0]; }, 8);
  REQUIRE(u.brackets.size() == 9);
  CHECK(u.brackets[0].width() == doctest::Approx(1.0));
  // Ratios are only formed above the return-map resolution; check the early ones too.
  for (int n = 1; n <= 4; ++n) CHECK(u.brackets[n].width() <= 0.6 * u.brackets[n - 1].width());
  CHECK(u.worst_ratio <= 0.6);
  CHECK_FALSE(u.contraction_violation);
  CHECK(u.brackets.back().width() < 1e-8);
}

TEST_CASE("flow-time averages") {
  const auto d = doubling_map();
  const Suspension unit(d, constant_roof(1.0));
  const auto half = flow_time_average(unit, {0.3, 0.0}, [](double, double s) { return s; }, 1e3, 2);
  CHECK(std::abs(half.value - 0.5) < 1e-2);
  CHECK(half.time == doctest::Approx(1e3));

  // Discrete Birkhoff oracle on the base.
  const auto g = [](double x) { return std::cos(6 * x); };
  const auto pts = orbit_points(d, 0.3, 5000, 2);
  double birk = 0.0;
  for (double x : pts) birk += g(x);
  birk /= 5000;
  const auto fa = flow_time_average(unit, {0.3, 0.0}, [&](double x, double) { return g(x); }, 5000, 2);
  CHECK(std::abs(fa.value - birk) < 1e-3);

  // Agreement with the lifted measure over the geometric base.
  const GeometricLorenzSpec sp;
  const auto f = geometric_lorenz_map(sp);
  const Suspension sus(f, exit_time_roof(sp));
  const auto m = lift_orbit_measure(f, sus.roof(), 0.3, 200000, 3);
  const auto phis = trig_observables(10, 17);
  double worst = 0.0;
  for (const auto& phi : phis) {
    const auto ta = flow_time_average(sus, {0.7, 0.0}, phi, 1e4, 3);
    REQUIRE_FALSE(ta.terminated);
    worst = std::max(worst, std::abs(ta.value - m.evaluate(phi).value));
  }
  MESSAGE("time vs space worst gap " << worst);
  CHECK(worst < 2e-2);
}

TEST_CASE("ergodicity transfer and injectivity of the lift") {
  const GeometricLorenzSpec sp;
  const auto f = geometric_lorenz_map(sp);
  const Suspension sus(f, exit_time_roof(sp));
  const auto rep = ergodicity_transfer(sus, [](double x, double s) { return std::cos(3 * x + s); }, 50, 2e4, 4);
  MESSAGE("worst pairwise z " << rep.worst_z << ", above 3: " << rep.pairs_above_3 << "/" << rep.pairs);
  CHECK(rep.pairs == 1225);
  CHECK(rep.worst_z <= 3.0);

  const auto glued = glued_two_component_map();
  const auto left = orbit_points(glued, 0.37, 20000, 1);
  auto both = orbit_points(glued, 1.61, 20000, 2);
  both.insert(both.end(), left.begin(), left.end());
  const LiftedMeasure m1(left, {}, constant_roof(1.0));
  const LiftedMeasure m2(both, {}, constant_roof(1.0));
  const auto ind = [](double x, double) { return x < 1.0 ? 1.0 : 0.0; };
  const auto e1 = m1.evaluate(ind), e2 = m2.evaluate(ind);
  CHECK(std::abs(e1.value - e2.value) > 5 * std::hypot(e1.stderr_, e2.stderr_));
}

TEST_CASE("evaluation CSV") {
  std::ostringstream os;
  write_evaluations_csv(os, {{"phi0", {0.5, 0.01, 100}}});
  CHECK(os.str() == "observable_id,estimate,stderr,n_samples\nphi0,0.5,0.01,100\n");
}
