#include "shlab/ergodic.hpp"
#include "shlab/expansive.hpp"
#include "shlab/hyperbolic.hpp"
#include "shlab/models.hpp"
#include "shlab/section.hpp"
#include "shlab/suspension.hpp"
#include "shlab/ulam.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace shlab;

namespace {

Vec3 vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

BranchMap1D named_map(const std::string& name, double mu, double beta) {
  if (name == "doubling") return doubling_map();
  if (name == "tent") return tent_map();
  if (name == "geometric") {
    GeometricLorenzSpec s;
    s.mu = mu;
    s.eigenvalues.lambda2 = -beta * s.eigenvalues.lambda1;
    return geometric_lorenz_map(s);
  }
  throw ValidationError("unknown map: " + name + " (doubling, tent, geometric)");
}

py::array_t<double> simulate(double T, double dt, std::array<double, 3> x0, double sigma, double r, double b,
                             double tol) {
  const auto l = lorenz_field(sigma, r, b);
  std::vector<double> buf;
  sample_orbit(l, vec3(x0), T, dt, [&](double t, const Vec3& x) {
    buf.insert(buf.end(), {t, x[0], x[1], x[2]});
  }, tol);
  py::array_t<double> out({static_cast<py::ssize_t>(buf.size() / 4), py::ssize_t{4}});
  std::copy(buf.begin(), buf.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core routines of the shlab C++ library";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("simulate", &simulate, py::arg("T"), py::arg("dt") = 0.01,
        py::arg("x0") = std::array<double, 3>{1.0, 1.0, 20.0}, py::arg("sigma") = 10.0, py::arg("r") = 28.0,
        py::arg("b") = 8.0 / 3.0, py::arg("tol") = 1e-9,
        "Lorenz orbit sampled on t = k*dt; rows (t, x, y, z).");

  m.def(
      "lyapunov_spectrum",
      [](double T, std::array<double, 3> x0, double sigma, double r, double b) {
        const auto res = qr_lyapunov(lorenz_field(sigma, r, b), vec3(x0), T);
        return py::make_tuple(res.exponents[0], res.exponents[1], res.exponents[2]);
      },
      py::arg("T"), py::arg("x0") = std::array<double, 3>{1.0, 1.0, 20.0}, py::arg("sigma") = 10.0,
      py::arg("r") = 28.0, py::arg("b") = 8.0 / 3.0, "QR Lyapunov exponents of the Lorenz flow.");

  m.def(
      "map_eval",
      [](const std::string& name, const std::vector<double>& xs, double mu, double beta) {
        const auto f = named_map(name, mu, beta);
        std::vector<double> out;
        out.reserve(xs.size());
        for (double x : xs) out.push_back(f(x));
        return out;
      },
      py::arg("name"), py::arg("xs"), py::arg("mu") = 1.95, py::arg("beta") = 0.52,
      "Evaluate an interval map (doubling, tent, geometric).");

  m.def(
      "quotient_map",
      [](int grid_n) {
        const GeometricLorenzFlow g;
        QuotientOptions q;
        q.grid_n = grid_n;
        const auto res = quotient_map(g, q);
        py::dict d;
        d["gamma0"] = res.gamma0;
        d["boundary_exponents"] = res.boundary_exponents;
        d["min_abs_derivative"] = res.min_abs_derivative;
        std::vector<double> x, fx, tau;
        for (const auto& row : res.table) {
          x.push_back(row.x);
          fx.push_back(row.f_x);
          tau.push_back(row.tau);
        }
        d["x"] = x;
        d["f_x"] = fx;
        d["tau"] = tau;
        return d;
      },
      py::arg("grid_n") = 2000, "Quotient map of the geometric Lorenz return map.");

  m.def(
      "acim",
      [](const std::string& name, int bins, double mu, double beta) {
        const auto f = named_map(name, mu, beta);
        const auto chain = build_ulam(f, bins);
        const auto dec = stationary_density(chain);
        py::dict d;
        d["edges"] = chain.edges;
        d["densities"] = dec.densities;
        d["residuals"] = dec.residuals;
        return d;
      },
      py::arg("name"), py::arg("bins") = 4096, py::arg("mu") = 1.95, py::arg("beta") = 0.52,
      "Ulam invariant densities (one per ergodic component).");

  m.def(
      "hyperbolic_time_frequency",
      [](const std::string& name, int seeds, long N, double b, double c, double delta, std::uint64_t seed) {
        HTParams p;
        p.b = b;
        p.c = c;
        p.delta = delta;
        const auto e = ht_frequency(named_map(name, 1.95, 0.52), seeds, N, p, seed);
        std::vector<double> thetas;
        for (const auto& r : e.records) thetas.push_back(r.theta);
        py::dict d;
        d["theta"] = thetas;
        d["positive"] = e.positive;
        d["theta_min"] = e.theta_min;
        return d;
      },
      py::arg("name") = "geometric", py::arg("seeds") = 10, py::arg("N") = 2000, py::arg("b") = 0.02,
      py::arg("c") = 0.1, py::arg("delta") = 1e-4, py::arg("seed") = 1,
      "Frequency of hyperbolic times over Lebesgue-random seeds.");

  m.def(
      "lifted_average",
      [](double roof, int samples, std::uint64_t seed) {
        const auto d = doubling_map();
        const auto lm = lift_orbit_measure(d, constant_roof(roof), 0.3, static_cast<std::size_t>(samples), seed);
        const auto e = lm.evaluate([](double, double s) { return s; });
        return py::make_tuple(e.value, e.stderr_);
      },
      py::arg("roof"), py::arg("samples") = 10000, py::arg("seed") = 1,
      "mu_X(s) for the doubling map under a constant roof (equals roof / 2).");

  m.def(
      "monotone_alignment",
      [](const std::vector<std::array<double, 3>>& xs, const std::vector<std::array<double, 3>>& ys,
         double grid_dt, double band_time) {
        std::vector<Vec3> a, b;
        for (const auto& p : xs) a.push_back(vec3(p));
        for (const auto& p : ys) b.push_back(vec3(p));
        AlignmentOptions o;
        o.grid_dt = grid_dt;
        o.band_time = band_time;
        const auto r = monotone_alignment(a, b, o);
        return py::make_tuple(r.sup_distance, r.unaligned_distance, r.h);
      },
      py::arg("xs"), py::arg("ys"), py::arg("grid_dt") = 0.01, py::arg("band_time") = 0.5,
      "Monotone slope-bounded alignment; returns (sup distance, unaligned distance, h).");

  m.def(
      "sensitivity",
      [](double r0, double delta_s, int perturbations, double lambda_plus, double t_cap, std::uint64_t seed) {
        const auto l = lorenz_field();
        const Vec3 x = flow_to(l, Vec3(1, 1, 20), 50.0);
        const auto s = sensitivity_probe(l, x, r0, delta_s, perturbations, lambda_plus, t_cap, seed);
        py::dict d;
        d["times"] = s.times;
        d["median"] = s.median;
        d["predicted"] = s.predicted;
        d["capped"] = s.capped;
        return d;
      },
      py::arg("r0") = 1e-6, py::arg("delta_s") = 1.0, py::arg("perturbations") = 20,
      py::arg("lambda_plus") = 0.9056, py::arg("t_cap") = 60.0, py::arg("seed") = 1,
      "Separation times of perturbed Lorenz orbits.");
}
