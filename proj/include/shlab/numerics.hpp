#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace shlab {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussRule& gauss_legendre(int n);

/// Integral of g over [a, b] with an n-point Gauss rule.
double gauss_integrate(const std::function<double(double)>& g, double a, double b, int n = 16);

/// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Kahan-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double y = v - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

/// Shortest round-trip decimal representation, locale independent.
std::string fmt_double(double v);

}  // namespace shlab
