#include "doctest.h"

#include "shlab/ergodic.hpp"
#include "shlab/interval_map.hpp"

#include <cmath>
#include <sstream>

using namespace shlab;

namespace {

const Observable kZ{"z", [](const Vec3& x) { return x[2]; }};
const Observable kX2{"x^2", [](const Vec3& x) { return x[0] * x[0]; }};

}  // namespace

TEST_CASE("empirical measure weights sum to one") {
  const auto l = lorenz_field();
  const auto m = empirical_measure(l, Vec3(1, 1, 20), 50, 0.05);
  double s = 0.0;
  for (double w : m.weights) s += w;
  CHECK(s == doctest::Approx(1.0));
  CHECK(m.integrate([](const Vec3&) { return 3.0; }) == doctest::Approx(3.0));
}

TEST_CASE("Birkhoff averages: constant observable, Lorenz uniqueness, convergence rate") {
  const auto l = lorenz_field();
  const Observable one{"one", [](const Vec3&) { return 1.0; }};
  BirkhoffOptions o;
  o.checkpoints = 3;
  const auto r = birkhoff_uniqueness(l, {one, kZ, kX2}, 100, 8000, 2, o);
  CHECK(r.escaped == 0);
  CHECK(r.observables[0].spread == 0.0);
  CHECK(r.clusters == 1);
  for (int j = 1; j < 3; ++j) {
    const auto& s = r.observables[j];
    // Spread at T = 2000 (first checkpoint) below 1% of the mean.
    CHECK(s.spread_history[0].first == doctest::Approx(2000));
    CHECK(s.spread_history[0].second < 0.01 * std::abs(s.mean));
    const double ratio = s.spread_history[0].second / s.spread_history[2].second;
    MESSAGE(s.name << ": spread ratio for T x4 = " << ratio);
    CHECK(ratio > 1.4);
    CHECK(ratio < 2.6);
  }
}

TEST_CASE("Birkhoff clusters: two basins are flagged, Lorenz basin is covered") {
  const auto dw = double_well_rotation();
  BirkhoffOptions o;
  o.box = {Vec3(-2, -2, -2), Vec3(2, 2, 2)};
  const auto two = birkhoff_uniqueness(dw, {{"x", [](const Vec3& x) { return x[0]; }}}, 40, 500, 3, o);
  CHECK(two.clusters == 2);

  const auto l = lorenz_field();
  const auto cover = birkhoff_uniqueness(l, {kZ}, 200, 500, 4);
  CHECK(cover.escaped == 0);
  CHECK(cover.largest_cluster_fraction >= 0.99);
}

TEST_CASE("spectrum structure: linear flow exact, Lorenz splitting and divergence") {
  const auto lin = linear_test_flow(0.5, 1.5);
  const auto e = spectrum_structure(lin, {Vec3(0, 0, 0)}, 50);
  CHECK(e.records[0].exponents[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(e.records[0].exponents[1]) < 1e-9);
  CHECK(e.records[0].exponents[2] == doctest::Approx(-1.5).epsilon(1e-6));

  const auto l = lorenz_field();
  const auto seeds = uniform_seeds(l, 3, 7);
  const auto r = spectrum_structure(l, seeds, 2000);
  CHECK(r.all_ok);
  CHECK(r.worst_zero_exponent < 5e-3);
  const double trace = -(10.0 + 1.0 + 8.0 / 3.0);  // analytic divergence
  for (const auto& rec : r.records) {
    const double sum = rec.exponents[0] + rec.exponents[1] + rec.exponents[2];
    CHECK(std::abs(sum - trace) / std::abs(trace) < 0.01);
    CHECK(rec.exponents[0] + rec.exponents[1] > 0);
  }
  std::ostringstream os;
  write_spectrum_csv(os, r);
  CHECK(os.str().rfind("seed_x,seed_y,seed_z,lambda_plus", 0) == 0);
}

TEST_CASE("entropy formula: three positive-exponent estimates agree") {
  const auto lin = linear_test_flow(0.5, 1.5);
  const auto e = entropy_formula_check(lin, {Vec3(0, 0, 0)}, 50, 5);
  CHECK(e.records[0].qr == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(e.records[0].unstable == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(e.records[0].cu_det == doctest::Approx(0.5).epsilon(1e-6));

  const auto l = lorenz_field();
  const auto r = entropy_formula_check(l, uniform_seeds(l, 2, 9), 2000);
  CHECK(r.worst_rel_dev < 0.03);
}

TEST_CASE("Abramov relation on the geometric model") {
  const GeometricLorenzFlow g;
  const auto a = abramov_check(g, 5000, 3);
  MESSAGE("map " << a.map_exponent << " flow " << a.flow_exponent << " tau " << a.mean_return_time);
  CHECK(a.rel_dev < 0.05);
  CHECK(a.flow_exponent > 0.0);
}

TEST_CASE("density profile: flat product measure") {
  const auto d = doubling_map();
  const auto xs = orbit_points(d, 0.3, 400000, 3);
  std::vector<std::array<double, 2>> pts;
  Rng rng(4);
  for (double x : xs) pts.push_back({x, uniform01(rng)});
  const auto p = density_from_samples(pts, {0, 1}, {0, 1}, 4, 16, [](double, double) { return 1.0; });
  double lo = 1e9, hi = 0.0, integral = 0.0;
  for (const auto& b : p.bands)
    for (double v : b.density) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      integral += v * (1.0 / 16) * 0.25;
    }
  CHECK(integral == doctest::Approx(1.0));
  CHECK(lo > 0.9);
  CHECK(hi < 1.1);
}

TEST_CASE("density profile: bounded under refinement, decays at the singularity") {
  const GeometricLorenzFlow g;
  const auto r = unstable_density_profile(g, 20000, 8, 32);
  MESSAGE("sup " << r.sup_coarse << " -> " << r.sup_fine << ", near " << r.near_density
                 << ", median " << r.median_density);
  CHECK(r.bounded);
  CHECK(r.decays);
  REQUIRE(r.coarse.size() == 2);
  for (const auto& p : r.coarse) {
    double integral = 0.0;
    for (const auto& b : p.bands)
      for (double v : b.density) integral += v * (2.0 / 32) * (1.0 / 8);
    CHECK(integral == doctest::Approx(1.0));
  }
  std::ostringstream os;
  write_profile_csv(os, r.coarse);
  CHECK(os.str().rfind("strip,band_lo,band_hi,bin,cu_lo,cu_hi,distance,count,density\n", 0) == 0);
}

TEST_CASE("support coverage") {
  const auto p = periodic_toy_flow();
  const auto c = support_coverage(p, Vec3(0.1, 1, 0), 200, 0.5, 10, 1);
  CHECK(c.fraction == 1.0);

  const auto l = lorenz_field();
  const auto r = support_coverage(l, Vec3(1, 1, 20), 5000, 0.5);
  MESSAGE("Lorenz coverage " << r.fraction << " (" << r.cells_orbit << "/" << r.cells_union << ")");
  for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k].second >= r.history[k - 1].second);
  CHECK(r.fraction > 0.8);
}
