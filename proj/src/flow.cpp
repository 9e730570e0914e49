#include "shlab/flow.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace shlab {

namespace {

using State6 = Eigen::Matrix<double, 6, 1>;
using State9 = Eigen::Matrix<double, 9, 1>;
using State12 = Eigen::Matrix<double, 12, 1>;

template <int N>
typename Dopri5<N>::Options options_for(double tol, double h_max = 0.1) {
  typename Dopri5<N>::Options o;
  o.tol = tol;
  o.h_max = h_max;
  return o;
}

void check_T(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("flow duration T must be > 0");
}

void check_tol(double tol) {
  if (!(tol > 0.0 && tol <= 1e-3)) throw ValidationError("tol must lie in (0, 1e-3]");
}

/// Fixes the QR sign convention so the diagonal of R is positive.
void positive_qr(const Mat3& m, Mat3& q, Vec3& rdiag) {
  Eigen::HouseholderQR<Mat3> qr(m);
  q = qr.householderQ();
  const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    rdiag[i] = r(i, i);
    if (rdiag[i] < 0) {
      rdiag[i] = -rdiag[i];
      q.col(i) = -q.col(i);
    }
  }
}

}  // namespace

std::array<std::complex<double>, 3> sorted_eigenvalues(const Mat3& a) {
  Eigen::EigenSolver<Mat3> es(a, false);
  std::array<std::complex<double>, 3> ev{};
  for (int i = 0; i < 3; ++i) ev[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  std::sort(ev.begin(), ev.end(), [](auto l, auto r) { return l.real() > r.real(); });
  return ev;
}

FlowSystem::FlowSystem(std::string name, std::map<std::string, double> params, Field rhs,
                       Jacobian jacobian, const std::vector<Vec3>& equilibria,
                       std::optional<TrappingBall> trapping)
    : name_(std::move(name)),
      params_(std::move(params)),
      rhs_(std::move(rhs)),
      jacobian_(std::move(jacobian)),
      trapping_(trapping) {
  for (const auto& e : equilibria) {
    if (rhs_(e).norm() >= 1e-10)
      throw ValidationError("listed equilibrium is not a zero of the field");
    equilibria_.push_back({e, sorted_eigenvalues(jacobian_(e))});
  }
}

double FlowSystem::param(const std::string& key) const {
  auto it = params_.find(key);
  if (it == params_.end()) throw ValidationError("unknown flow parameter: " + key);
  return it->second;
}

double FlowSystem::jacobian_consistency(const std::vector<Vec3>& states, double h) const {
  double worst = 0.0;
  for (const auto& x : states) {
    Mat3 fd;
    for (int j = 0; j < 3; ++j) {
      Vec3 e = Vec3::Zero();
      const double step = h * std::max(1.0, std::abs(x[j]));
      e[j] = step;
      fd.col(j) = (rhs_(x + e) - rhs_(x - e)) / (2 * step);
    }
    const Mat3 an = jacobian_(x);
    const double scale = std::max(an.norm(), 1e-12);
    worst = std::max(worst, (an - fd).norm() / scale);
  }
  return worst;
}

Vec3 Trajectory::at(double t) const {
  if (segments_.empty()) throw ValidationError("empty trajectory");
  if (t < t_begin() || t > t_end()) throw ValidationError("time outside trajectory span");
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                             [](const Segment& s, double v) { return s.t1 < v; });
  if (it == segments_.end()) it = std::prev(segments_.end());
  const double h = it->t1 - it->t0;
  if (h == 0.0) return it->c1;
  const double th = (t - it->t0) / h;
  const double th1 = 1.0 - th;
  return it->c1 + th * (it->c2 + th1 * (it->c3 + th * (it->c4 + th1 * it->c5)));
}

std::vector<double> Trajectory::step_times() const {
  std::vector<double> out;
  out.reserve(segments_.size() + 1);
  if (segments_.empty()) return out;
  out.push_back(segments_.front().t0);
  for (const auto& s : segments_) out.push_back(s.t1);
  return out;
}

std::vector<Vec3> Trajectory::sample(double dt) const {
  std::vector<Vec3> out;
  const auto n = static_cast<std::size_t>(std::floor((t_end() - t_begin()) / dt + 1e-9));
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(at(t_begin() + static_cast<double>(k) * dt));
  return out;
}

Trajectory flow(const FlowSystem& system, const Vec3& x0, double T, double tol) {
  check_T(T);
  check_tol(tol);
  Dopri5<3> ode([&](const Vec3& x) { return system.rhs(x); }, x0, 0.0, options_for<3>(tol));
  std::vector<Trajectory::Segment> segs;
  while (ode.time() < T) {
    ode.step(T);
    const auto c = ode.dense_coefficients();
    segs.push_back({ode.step_start(), ode.time(), c[0], c[1], c[2], c[3], c[4]});
  }
  return Trajectory(std::move(segs), tol);
}

Vec3 flow_to(const FlowSystem& system, const Vec3& x0, double T, double tol) {
  check_tol(tol);
  if (T == 0.0) return x0;
  check_T(T);
  Dopri5<3> ode([&](const Vec3& x) { return system.rhs(x); }, x0, 0.0, options_for<3>(tol));
  while (ode.time() < T) ode.step(T);
  return ode.state();
}

void sample_orbit(const FlowSystem& system, const Vec3& x0, double T, double dt,
                  const std::function<void(double, const Vec3&)>& observer, double tol) {
  check_T(T);
  check_tol(tol);
  require(dt > 0.0, "sampling step must be positive");
  Dopri5<3> ode([&](const Vec3& x) { return system.rhs(x); }, x0, 0.0, options_for<3>(tol));
  observer(0.0, x0);
  long k = 1;
  const long n = static_cast<long>(std::floor(T / dt + 1e-9));
  while (k <= n) {
    ode.step(T);
    while (k <= n && static_cast<double>(k) * dt <= ode.time()) {
      const double t = static_cast<double>(k) * dt;
      observer(t, ode.dense(t));
      ++k;
    }
  }
}

Vec3 tangent_flow(const FlowSystem& system, const Vec3& x0, const Vec3& v0, double T,
                  double tol) {
  require(v0.norm() > 0.0, "tangent vector must be nonzero");
  if (T == 0.0) return v0;
  check_T(T);
  State6 y;
  y << x0, v0;
  Dopri5<6> ode(
      [&](const State6& s) {
        State6 d;
        const Vec3 x = s.head<3>();
        d.head<3>() = system.rhs(x);
        d.tail<3>() = system.jacobian(x) * s.tail<3>();
        return d;
      },
      y, 0.0, options_for<6>(tol));
  while (ode.time() < T) ode.step(T);
  return ode.state().tail<3>();
}

std::pair<Vec3, Mat3> flow_with_jacobian(const FlowSystem& system, const Vec3& x0, double T,
                                         double tol) {
  State12 y;
  y.head<3>() = x0;
  y.segment<3>(3) = Vec3::UnitX();
  y.segment<3>(6) = Vec3::UnitY();
  y.segment<3>(9) = Vec3::UnitZ();
  if (T == 0.0) return {x0, Mat3::Identity()};
  check_T(T);
  Dopri5<12> ode(
      [&](const State12& s) {
        State12 d;
        const Vec3 x = s.head<3>();
        const Mat3 j = system.jacobian(x);
        d.head<3>() = system.rhs(x);
        for (int c = 0; c < 3; ++c) d.segment<3>(3 + 3 * c) = j * s.segment<3>(3 + 3 * c);
        return d;
      },
      y, 0.0, options_for<12>(tol));
  while (ode.time() < T) ode.step(T);
  Mat3 m;
  for (int c = 0; c < 3; ++c) m.col(c) = ode.state().segment<3>(3 + 3 * c);
  return {ode.state().head<3>(), m};
}

double cu_area_growth(const FlowSystem& system, const Vec3& x0, const Vec3& a, const Vec3& b,
                      double T, double tol) {
  const double area0 = a.cross(b).norm();
  const double angle = std::asin(std::clamp(area0 / (a.norm() * b.norm()), 0.0, 1.0));
  if (!(a.norm() > 0 && b.norm() > 0) || angle < 1e-8)
    throw ValidationError("degenerate plane: spanning vectors are (nearly) parallel");
  if (T == 0.0) return 0.0;
  check_T(T);
  State9 y;
  y << x0, a, b;
  Dopri5<9> ode(
      [&](const State9& s) {
        State9 d;
        const Vec3 x = s.head<3>();
        const Mat3 j = system.jacobian(x);
        d.head<3>() = system.rhs(x);
        d.segment<3>(3) = j * s.segment<3>(3);
        d.segment<3>(6) = j * s.segment<3>(6);
        return d;
      },
      y, 0.0, options_for<9>(tol));
  while (ode.time() < T) ode.step(T);
  const Vec3 ea = ode.state().segment<3>(3), eb = ode.state().segment<3>(6);
  return std::log(ea.cross(eb).norm() / area0);
}

LyapunovResult tangent_walk(const FlowSystem& system, const Vec3& x0, double T, double dt,
                            double transient, const std::function<void(const TangentStep&)>& visit,
                            double tol) {
  check_T(T);
  require(dt > 0.0 && dt < T, "renormalization step must satisfy 0 < step < T");
  require(transient >= 0.0, "transient must be nonnegative");
  const auto& trap = system.trapping();
  auto rhs12 = [&](const State12& s) {
    State12 d;
    const Vec3 x = s.head<3>();
    const Mat3 j = system.jacobian(x);
    d.head<3>() = system.rhs(x);
    for (int c = 0; c < 3; ++c) d.segment<3>(3 + 3 * c) = j * s.segment<3>(3 + 3 * c);
    return d;
  };

  Vec3 x = x0;
  if (transient > 0) x = flow_to(system, x0, transient, tol);
  Mat3 q = Mat3::Identity();
  Vec3 sums = Vec3::Zero();
  double div_sum = 0.0;
  LyapunovResult res;
  const long n = std::max(1L, static_cast<long>(std::llround(T / dt)));
  const long every = std::max(1L, n / 8);
  for (long k = 0; k < n; ++k) {
    State12 y;
    y.head<3>() = x;
    for (int c = 0; c < 3; ++c) y.segment<3>(3 + 3 * c) = Vec3::Unit(c);
    Dopri5<12> ode(rhs12, y, 0.0, options_for<12>(tol));
    // Divergence is integrated alongside with the midpoint of each step.
    double div_int = 0.0;
    while (ode.time() < dt) {
      ode.step(dt);
      const double tm = 0.5 * (ode.step_start() + ode.time());
      div_int += system.divergence(ode.dense(tm).template head<3>()) *
                 (ode.time() - ode.step_start());
    }
    Mat3 jac;
    for (int c = 0; c < 3; ++c) jac.col(c) = ode.state().segment<3>(3 + 3 * c);
    if (visit) visit(TangentStep{x, jac, q});
    Mat3 qn;
    Vec3 rd;
    positive_qr(jac * q, qn, rd);
    for (int i = 0; i < 3; ++i) sums[i] += std::log(rd[i]);
    div_sum += div_int;
    q = qn;
    x = ode.state().head<3>();
    if (trap && !trap->contains(x))
      throw EscapeError("orbit escaped the trapping region", transient + (k + 1) * dt);
    if ((k + 1) % every == 0) {
      const double t = (k + 1) * dt;
      res.history.push_back({t, {sums[0] / t, sums[1] / t, sums[2] / t}});
    }
  }
  const double total = n * dt;
  std::array<double, 3> ex{sums[0] / total, sums[1] / total, sums[2] / total};
  std::sort(ex.begin(), ex.end(), std::greater<>());
  res.exponents = ex;
  res.averaging_time = total;
  res.end_state = x;
  res.mean_divergence = div_sum / total;
  return res;
}

LyapunovResult qr_lyapunov(const FlowSystem& system, const Vec3& x0, double T,
                           const LyapunovOptions& opt) {
  require(opt.renorm_step > 0.0 && T > 2 * opt.renorm_step,
          "qr_lyapunov requires T >> renorm_step > 0");
  return tangent_walk(system, x0, T, opt.renorm_step, opt.transient, nullptr, opt.tol);
}

double domination_rate(const FlowSystem& system, const Vec3& x0,
                       const std::vector<double>& windows, int segments, double tol) {
  require(windows.size() >= 2, "need at least two window lengths");
  std::vector<double> ts, ys;
  Vec3 x = flow_to(system, x0, 10.0, tol);
  for (int s = 0; s < segments; ++s) {
    for (double w : windows) {
      const auto [end, m] = flow_with_jacobian(system, x, w, tol);
      (void)end;
      Eigen::JacobiSVD<Mat3> svd(m);
      const Vec3 sv = svd.singularValues();
      ts.push_back(w);
      ys.push_back(std::log(sv[2] / sv[1]));
    }
    x = flow_to(system, x, 3.7, tol);
  }
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    my += ys[i];
  }
  mt /= ts.size();
  my /= ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (ys[i] - my);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  return sxy / sxx;
}

}  // namespace shlab
