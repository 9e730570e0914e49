#include "doctest.h"

#include "shlab/hyperbolic.hpp"
#include "shlab/models.hpp"

#include <cmath>
#include <sstream>

using namespace shlab;

namespace {

constexpr double kBeta = 0.52;
constexpr double kMu = 1.95;

double f_exact(double x) { return x < 0 ? 1.0 - kMu * std::pow(-x, kBeta) : kMu * std::pow(x, kBeta) - 1.0; }
double df_exact(double x) { return kMu * kBeta * std::pow(std::abs(x), kBeta - 1.0); }
double dist_exact(double x, double delta) {
  const double d = std::min({std::abs(x + 1.0), std::abs(x), std::abs(x - 1.0)});
  return d < delta ? d : 1.0;
}

// Direct product evaluation over every k.
bool brute_force(const std::vector<double>& orb, long n, const HTParams& p) {
  double inv = 1.0, dist = 1.0;
  for (long k = 1; k <= n; ++k) {
    const double x = orb[n - k];
    inv /= df_exact(x);
    dist *= dist_exact(x, p.delta);
    if (inv > std::exp(-p.c * k) || dist < std::exp(-p.b * k)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("truncated distance") {
  const auto f = geometric_lorenz_map(GeometricLorenzSpec{});
  CHECK(f.truncated_distance(0.025, 0.05) == doctest::Approx(0.025));
  CHECK(f.truncated_distance(-0.1, 0.05) == 1.0);
  CHECK(f.truncated_distance(0.0, 0.05) == 0.0);
}

TEST_CASE("doubling map: every time is hyperbolic at c = log 2, none above") {
  const auto d = doubling_map();
  HTParams p;
  p.c = std::log(2.0);
  for (long n : {1L, 2L, 7L, 100L}) {
    const auto h = is_hyperbolic_time(d, 0.3, n, p, 5);
    CHECK(h.defined);
    CHECK(h.hyperbolic);
    CHECK(h.expansion_margin == 0.0);
  }
  const auto e = ht_frequency(d, 4, 1000, p, 3);
  CHECK(e.theta_min == 1.0);
  p.c = std::log(2.0) + 0.1;
  for (long n : {1L, 5L, 50L}) CHECK_FALSE(is_hyperbolic_time(d, 0.3, n, p, 5).hyperbolic);
  CHECK(hyperbolic_times(d, 0.3, 1000, p, 5).times.empty());
}

TEST_CASE("geometric map: detection matches brute-force products") {
  const auto f = geometric_lorenz_map(GeometricLorenzSpec{});
  HTParams p;
  p.delta = 0.05;
  std::vector<double> orb{0.3};
  for (int i = 0; i < 60; ++i) orb.push_back(f_exact(orb.back()));
  const auto rec = hyperbolic_times(f, 0.3, 50, p);
  int agree = 0, found = 0;
  for (long n = 1; n <= 50; ++n) {
    const bool bf = brute_force(orb, n, p);
    const bool single = is_hyperbolic_time(f, 0.3, n, p).hyperbolic;
    const bool listed = std::find(rec.times.begin(), rec.times.end(), n) != rec.times.end();
    CHECK(bf == single);
    CHECK(bf == listed);
    agree += bf == single && bf == listed;
    found += bf;
  }
  CHECK(agree == 50);
  CHECK(found > 0);
}

TEST_CASE("geometric map: positive frequency, quad re-check, monotone in c") {
  const auto f = geometric_lorenz_map(GeometricLorenzSpec{});
  const HTParams p;
  const auto e = ht_frequency(f, 100, 2000, p, 11);
  CHECK(e.positive == 100);
  CHECK(e.theta_min > 0.0);
  long bad = 0;
  for (const auto& r : e.records) bad += recheck_quad(f, r, p);
  CHECK(bad == 0);
  // Second inequality at k = 1: no time n with d(x_{n-1}) < e^{-b}, d < delta.
  const auto& r0 = e.records[0];
  const auto pts = orbit_points(f, r0.x0, 2000, r0.seed);
  for (long n : r0.times) CHECK(f.truncated_distance(pts[n - 1], p.delta) >= std::exp(-p.b));

  double prev = 2.0;
  for (double c : {0.02, 0.05, 0.1, 0.2, 0.3}) {
    HTParams q = p;
    q.c = c;
    q.enforce_b_below_c4 = false;
    long total = 0;
    for (int s = 0; s < 10; ++s) total += hyperbolic_times(f, e.records[s].x0, 2000, q).times.size();
    const double th = total / 20000.0;
    CHECK(th <= prev);
    prev = th;
  }
}

TEST_CASE("doubling consequences: dyadic preimages, exact contraction, no distortion") {
  const auto d = doubling_map();
  HTParams p;
  p.c = std::log(2.0);
  const auto r = verify_ht_consequences(d, 0.3, 10, p, {}, 5);
  REQUIRE(r.inverted);
  CHECK_FALSE(r.contradiction);
  CHECK(r.beta1 > 0.0);
  REQUIRE(r.W.size() == 11);
  CHECK(r.W[10].length() == doctest::Approx(std::ldexp(r.W[0].length(), -10)).epsilon(1e-9));
  // Contraction is exactly 2^{-k}; relative to e^{-ck/2} the worst ratio is 2^{-1/2} at k = 1.
  CHECK(r.worst_contraction == doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(r.contraction_ok);
  CHECK(r.beta2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("geometric consequences at detected times, distortion stable in n") {
  const auto f = geometric_lorenz_map(GeometricLorenzSpec{});
  const HTParams p;
  const auto rec = hyperbolic_times(f, 0.3, 200, p, 2);
  std::vector<long> picks;
  for (long target : {10L, 20L, 40L}) {
    auto it = std::lower_bound(rec.times.begin(), rec.times.end(), target);
    REQUIRE(it != rec.times.end());
    picks.push_back(*it);
  }
  double radius = p.delta;
  for (long n : picks) {
    const auto r = verify_ht_consequences(f, rec.x0, n, p, {}, 2);
    REQUIRE(r.inverted);
    CHECK(r.contraction_ok);
    CHECK(r.beta1 > 0.0);
    radius = std::min(radius, r.beta1);
  }
  std::vector<double> b2;
  for (long n : picks) {
    HTConsequenceOptions o;
    o.radius = radius;
    const auto r = verify_ht_consequences(f, rec.x0, n, p, o, 2);
    REQUIRE(r.inverted);
    CHECK(r.contraction_ok);
    b2.push_back(r.beta2);
  }
  const double lo = *std::min_element(b2.begin(), b2.end());
  const double hi = *std::max_element(b2.begin(), b2.end());
  MESSAGE("beta1 = " << radius << ", beta2 = " << b2[0] << " " << b2[1] << " " << b2[2]);
  CHECK(hi / lo < 1.2);
}

TEST_CASE("lifted consequences: crossing count constant on W_n") {
  const GeometricLorenzFlow g;
  const auto f = geometric_lorenz_map(g.spec());
  const HTParams p;
  const auto rec = hyperbolic_times(f, 0.3, 40, p, 2);
  REQUIRE_FALSE(rec.times.empty());
  HTConsequenceOptions o;
  o.lift = &g;
  o.pairs = 8;
  const auto r = verify_ht_consequences(f, rec.x0, rec.times.front(), p, o, 2);
  REQUIRE(r.inverted);
  CHECK(r.crossings_constant);
}

TEST_CASE("CSV output") {
  HTRecord r;
  r.seed = 4;
  r.times = {1, 3, 8};
  r.theta = 0.375;
  std::ostringstream os;
  write_ht_csv(os, {r});
  CHECK(os.str() == "seed,n_k,theta\n4,1;3;8,0.375\n");
}
