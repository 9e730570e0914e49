#pragma once

// Dormand-Prince 5(4) embedded pair with the 4th-order continuous extension.

#include "shlab/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

namespace shlab {

template <int N>
class Dopri5 {
 public:
  using State = Eigen::Matrix<double, N, 1>;
  using Rhs = std::function<State(const State&)>;

  struct Options {
    double tol = 1e-9;          // atol = rtol = tol
    double h_init = 1e-3;
    double h_max = 0.25;
    double h_min = 1e-14;
    double divergence_norm = 1e6;
    long max_steps = 200'000'000;
  };

  Dopri5(Rhs rhs, const State& y0, double t0, Options opt)
      : rhs_(std::move(rhs)), opt_(opt), t_(t0), t_prev_(t0), y_(y0), h_(opt.h_init) {
    check_finite(y_, t_);
    k1_ = rhs_(y_);
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  /// Start of the last accepted step.
  double step_start() const { return t_prev_; }
  long steps() const { return steps_; }

  /// Dense output inside the last accepted step [step_start(), time()].
  State dense(double t) const {
    const double h = t_ - t_prev_;
    if (h == 0.0) return y_;
    const double th = (t - t_prev_) / h;
    const double th1 = 1.0 - th;
    return rc1_ + th * (rc2_ + th1 * (rc3_ + th * (rc4_ + th1 * rc5_)));
  }

  /// Coefficients of the continuous extension of the last accepted step:
  /// y(th) = c1 + th(c2 + (1-th)(c3 + th(c4 + (1-th)c5))), th in [0,1].
  std::array<State, 5> dense_coefficients() const { return {rc1_, rc2_, rc3_, rc4_, rc5_}; }

  /// Advance by one accepted step, never passing t_stop.
  void step(double t_stop) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    for (;;) {
      if (++steps_ > opt_.max_steps) throw NumericalError("integrator step cap exceeded");
      double h = std::min(h_, opt_.h_max);
      bool last = false;
      if (t_ + h >= t_stop) {
        h = t_stop - t_;
        last = true;
      }
      const State k2 = rhs_(y_ + h * (a21 * k1_));
      const State k3 = rhs_(y_ + h * (a31 * k1_ + a32 * k2));
      const State k4 = rhs_(y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
      const State k5 = rhs_(y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
      const State k6 =
          rhs_(y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const State y1 =
          y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      const State k7 = rhs_(y1);
      const State err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double acc = 0.0;
      for (int i = 0; i < y_.size(); ++i) {
        const double sc = opt_.tol + opt_.tol * std::max(std::abs(y_[i]), std::abs(y1[i]));
        acc += (err[i] / sc) * (err[i] / sc);
      }
      const double en = std::sqrt(acc / static_cast<double>(y_.size()));

      if (!std::isfinite(en)) {
        h_ = 0.25 * h;
        if (h_ < opt_.h_min) throw DivergenceError("non-finite state in integration", t_);
        continue;
      }
      if (en <= 1.0) {
        rc1_ = y_;
        rc2_ = y1 - y_;
        rc3_ = h * k1_ - rc2_;
        rc4_ = rc2_ - h * k7 - rc3_;
        rc5_ = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        t_prev_ = t_;
        t_ = last ? t_stop : t_ + h;
        y_ = y1;
        k1_ = k7;
        check_finite(y_, t_prev_);
        const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        if (!last) h_ = h * fac;
        return;
      }
      h_ = h * std::max(0.2, 0.9 * std::pow(en, -0.2));
      if (h_ < opt_.h_min) throw NumericalError("step size underflow at t=" + std::to_string(t_));
    }
  }

 private:
  void check_finite(const State& y, double t) const {
    if (!y.allFinite()) throw DivergenceError("non-finite state", t);
    if (y.template head<3>().norm() > opt_.divergence_norm)
      throw DivergenceError("state norm exceeded divergence guard", t);
  }

  Rhs rhs_;
  Options opt_;
  double t_;
  double t_prev_;
  State y_;
  State k1_;
  double h_;
  long steps_ = 0;
  State rc1_, rc2_, rc3_, rc4_, rc5_;
};

}  // namespace shlab
