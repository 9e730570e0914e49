#include "doctest.h"

#include "shlab/models.hpp"
#include "shlab/section.hpp"

#include <cmath>
#include <sstream>

using namespace shlab;

namespace {

constexpr double kBeta = 0.52;
constexpr double kMu = 1.95;

// Analytic return of the geometric model in box coordinates (x1, x2) on {x3 = 1}.
struct Analytic {
  double x1, x2, tau;
};

Analytic analytic_return(double x1, double x2, const GeometricLorenzSpec& sp) {
  const auto& e = sp.eigenvalues;
  const double a = std::abs(x1), s = x1 > 0 ? 1.0 : -1.0;
  const double t = -std::log(a) / e.lambda1;
  const double y2 = x2 * std::exp(e.lambda3 * t);
  const double y3 = std::exp(e.lambda2 * t);
  return {s * (sp.mu * y3 - 1.0), s * sp.fold_offset + sp.leaf_gain * y2, t + sp.transit_time};
}

SectionPoint box_point(double x1, double x2) { return {0, Vec2(0.5 * (x2 + 1), 0.5 * (x1 + 1))}; }

double quotient_exact(double x) {
  return (x > 0 ? 1.0 : -1.0) * (kMu * std::pow(std::abs(x), kBeta) - 1.0);
}

}  // namespace

TEST_CASE("geometric first return matches the analytic continuation") {
  const GeometricLorenzFlow g;
  for (double x1 : {0.7, -0.3, 0.05, -1e-4}) {
    for (double x2 : {-0.8, 0.1, 0.6}) {
      const auto r = g.first_return(box_point(x1, x2));
      REQUIRE(r.ok());
      const auto a = analytic_return(x1, x2, g.spec());
      const Vec3 img = g.point(r.image);
      CHECK(std::abs(img[0] - a.x1) < 1e-6);
      CHECK(std::abs(img[1] - a.x2) < 1e-6);
      CHECK(std::abs(r.tau - a.tau) < 1e-6);
      CHECK(r.crossings == 1);
    }
  }
}

TEST_CASE("stable line of the flow box gives the stable-manifold signal") {
  const GeometricLorenzFlow g;
  const auto r = g.first_return(box_point(0.0, 0.3));
  CHECK(r.status == ReturnStatus::stable_manifold);
  CHECK(r.tau < g.options().t_max);
}

TEST_CASE("composite return respects the minimum flight time") {
  const GeometricLorenzFlow g;
  const auto z = box_point(0.6, 0.2);
  const auto cr = composite_return(g, z, 6.0, false);
  REQUIRE(cr.sample.ok());
  CHECK(cr.sample.tau >= 6.0);
  CHECK(cr.sample.crossings == static_cast<int>(cr.path.size()) - 1);
  CHECK(g.first_return(z, 6.0).tau == doctest::Approx(cr.sample.tau).epsilon(1e-9));
}

TEST_CASE("geometric section is injective, transverse and adapted") {
  const GeometricLorenzFlow g;
  const auto hits = attractor_hits(g, box_point(0.3, 0.1), 500);
  const auto c = check_section(g, 0, 15, hits);
  CHECK(c.injective);
  CHECK(c.transverse);
  CHECK(c.adapted);
  CHECK(c.adaptedness > g.sections()[0].delta());
}

TEST_CASE("period-two orbit of the geometric return map") {
  const GeometricLorenzFlow g;
  // Independent oracle: mu x^beta - 1 = -x on (0, 1) by bisection.
  double lo = 0.05, hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (kMu * std::pow(m, kBeta) - 1.0 + m < 0 ? lo : hi) = m;
  }
  const double xs = 0.5 * (lo + hi);
  const double period = 2 * (-std::log(xs) + g.spec().transit_time);
  const auto po = refine_periodic_orbit(g, box_point(xs + 0.01, 0.4), 2);
  REQUIRE(po.converged);
  const auto r1 = g.first_return(po.point);
  const auto r2 = g.first_return(r1.image);
  CHECK((r2.image.uv - po.point.uv).norm() < 1e-6);
  CHECK(r1.tau + r2.tau == doctest::Approx(period).epsilon(1e-6));
  CHECK(std::abs(g.point(po.point)[0] - xs) < 1e-6);
  CHECK(po.period == doctest::Approx(period).epsilon(1e-6));
}

TEST_CASE("stable direction of the geometric model is the u axis") {
  const GeometricLorenzFlow g;
  for (double x1 : {0.4, -0.7, 0.02}) {
    const auto sd = estimate_stable_direction(g, box_point(x1, 0.3), 4);
    CHECK(std::abs(sd.direction[1]) < 1e-3);
    CHECK(sd.contraction < 0.5);
    CHECK(sd.returns == 4);
  }
  // A point on the stable line has no returns at all.
  CHECK_THROWS_AS(estimate_stable_direction(g, box_point(0.0, 0.3), 4), NumericalError);
}

TEST_CASE("stable leaves contract by at least one half") {
  const GeometricLorenzFlow g;
  const auto hits = attractor_hits(g, box_point(0.3, 0.1), 300);
  const auto lc = leaf_contraction(g, hits, 1000);
  CHECK(lc.pairs >= 990);
  CHECK(lc.max_ratio <= 0.5);
}

TEST_CASE("cone field: cu edge stays inside, calibration and expansion growth") {
  const GeometricLorenzFlow g;
  ConeOptions o;
  o.samples = 300;
  o.t2 = 1.0;
  const auto one = cone_check(g, o);
  CHECK(one.vectors == 600 - 2 * one.rejected);
  CHECK(one.max_width <= 0.5 * o.rho);

  std::vector<double> cands;
  for (int t = 2; t <= 40; t += 2) cands.push_back(t);
  const auto cal = calibrate_t2(g, o, cands);
  REQUIRE(cal.found);
  CHECK(cal.reports.back().min_expansion >= 2.5);

  std::vector<ConeReport> reps;
  for (double dt : {0.0, 4.0, 8.0}) {
    ConeOptions oo = o;
    oo.t2 = cal.t2 + dt;
    reps.push_back(cone_check(g, oo));
  }
  CHECK(expansion_rate(reps) > 0.0);
}

TEST_CASE("quotient map recovers the analytic Lorenz map") {
  const GeometricLorenzFlow g;
  QuotientOptions q;
  q.grid_n = 1000;
  const auto res = quotient_map(g, q);
  REQUIRE(res.gamma0.size() == 3);
  CHECK(res.gamma0[0] == doctest::Approx(-1.0));
  CHECK(std::abs(res.gamma0[1]) < 1e-8);
  CHECK(res.gamma0[2] == doctest::Approx(1.0));
  CHECK(res.holes.empty());
  REQUIRE(res.map.branches().size() == 2);

  double worst = 0.0;
  for (int k = 0; k <= 4000; ++k) {
    const double x = -1.0 + 2.0 * k / 4000;
    if (res.map.distance_to_singular(x) < 1e-2) continue;
    worst = std::max(worst, std::abs(res.map(x) - quotient_exact(x)));
  }
  CHECK(worst < 1e-3);
  REQUIRE(res.boundary_exponents.size() == 2);
  for (double e : res.boundary_exponents) CHECK(std::abs(e - kBeta) / kBeta < 0.05);
  CHECK(res.min_abs_derivative > 1.0);
  CHECK(res.max_tau_near_boundary > 15.0);

  // Gamma0 count is stable under grid doubling.
  q.grid_n = 2000;
  CHECK(quotient_map(g, q).gamma0.size() == res.gamma0.size());

  // Semi-conjugacy p(R(x)) = f(p(x)) off Gamma.
  const auto hits = attractor_hits(g, box_point(0.3, 0.1), 200);
  for (const auto& h : hits) {
    const double x = g.sections()[0].leaf(h.uv[1]);
    if (res.map.distance_to_singular(x) < 1e-2) continue;
    const auto r = g.first_return(h);
    CHECK(std::abs(g.sections()[0].leaf(r.image.uv[1]) - res.map(x)) < 1e-3);
  }

  std::ostringstream os;
  write_return_table_csv(os, res.table);
  CHECK(os.str().rfind("branch_id,x,f_x,tau,r\n", 0) == 0);
  CHECK(res.table.size() == 1000);
}

TEST_CASE("return time is integrable: nested sample means agree") {
  const GeometricLorenzFlow g;
  const auto a = mean_return_time(g, 10000, 5);
  const auto b = mean_return_time(g, 40000, 5);
  CHECK(a.holes == 0);
  CHECK(std::abs(a.mean - b.mean) / b.mean < 0.01);
  // E[-log U] + transit = 2.
  CHECK(b.mean == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("Lorenz sections: returns, stable direction, periodic orbit") {
  const auto lor = lorenz_field();
  const auto secs = lorenz_sections(lor);
  REQUIRE(secs.size() == 2);
  const FlowReturnSystem sys(lor, secs);
  const SectionPoint start{0, Vec2(0.5, 0.5)};
  const auto hits = attractor_hits(sys, start, 400);
  int both[2] = {0, 0};
  for (const auto& h : hits) {
    ++both[h.section];
    CHECK(secs[h.section].covers(h.uv));
  }
  CHECK(both[0] > 50);
  CHECK(both[1] > 50);
  const auto chk0 = check_section(sys, 0, 10, hits, true);
  CHECK(chk0.adapted);

  // Closest two-return recurrence, then Newton.
  double best = 1e9;
  SectionPoint guess;
  for (const auto& h : hits) {
    const auto cr = composite_return(sys, h, 0.0, false);
    if (!cr.sample.ok()) continue;
    const auto c2 = composite_return(sys, cr.sample.image, 0.0, false);
    if (!c2.sample.ok() || c2.sample.image.section != h.section) continue;
    const double d = (c2.sample.image.uv - h.uv).norm();
    if (d < best) {
      best = d;
      guess = h;
    }
  }
  const auto po = refine_periodic_orbit(sys, guess, 2, 1e-10);
  REQUIRE(po.converged);
  // Independent oracle: integrate the ODE for one period.
  const Vec3 x = sys.point(po.point);
  const Vec3 back = flow_to(lor, x, po.period, 1e-12);
  CHECK((back - x).norm() < 1e-6);
}
