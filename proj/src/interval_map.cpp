#include "shlab/interval_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shlab {

BranchMap1D::BranchMap1D(std::string name, Interval domain, std::vector<Branch> branches,
                         std::vector<double> singular_set, std::optional<PowerLaw> power_law,
                         DigitDynamics digits)
    : name_(std::move(name)),
      domain_(domain),
      branches_(std::move(branches)),
      singular_(std::move(singular_set)),
      power_law_(power_law),
      digits_(digits) {
  require(!branches_.empty(), "interval map needs at least one branch");
  std::sort(branches_.begin(), branches_.end(),
            [](const Branch& a, const Branch& b) { return a.domain.lo < b.domain.lo; });
  std::sort(singular_.begin(), singular_.end());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto& b = branches_[i];
    require(b.domain.lo < b.domain.hi, "branch domain must be a nondegenerate interval");
    require(b.domain.lo >= domain_.lo && b.domain.hi <= domain_.hi, "branch outside the domain");
    if (i > 0) require(branches_[i - 1].domain.hi <= b.domain.lo, "branches overlap");
    require(static_cast<bool>(b.map) && static_cast<bool>(b.derivative),
            "branch needs map and derivative");
    const double a = b.map(b.domain.lo), c = b.map(b.domain.hi);
    b.increasing = c > a;
    b.image = b.increasing ? Interval{a, c} : Interval{c, a};
    // Monotonicity on a grid; tabulated branches are the ones at risk.
    double prev = a;
    constexpr int kProbe = 64;
    for (int k = 1; k <= kProbe; ++k) {
      const double x = b.domain.lo + b.domain.length() * k / kProbe;
      const double y = b.map(x);
      if (b.increasing ? y < prev : y > prev)
        throw ValidationError("branch " + std::to_string(i) + " of " + name_ + " is not monotone");
      prev = y;
    }
  }
}

std::optional<std::size_t> BranchMap1D::branch_of(double x) const {
  auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                             [](double v, const Branch& b) { return v < b.domain.lo; });
  if (it == branches_.begin()) return std::nullopt;
  --it;
  if (x >= it->domain.lo && x < it->domain.hi) return static_cast<std::size_t>(it - branches_.begin());
  return std::nullopt;
}

double BranchMap1D::operator()(double x) const {
  const auto i = branch_of(x);
  if (!i) throw ValidationError("point outside every branch of " + name_);
  return branches_[*i].map(x);
}

double BranchMap1D::derivative(double x) const {
  const auto i = branch_of(x);
  if (!i) throw ValidationError("point outside every branch of " + name_);
  return branches_[*i].derivative(x);
}

double BranchMap1D::inverse(std::size_t i, double y) const {
  const auto& b = branches_.at(i);
  const double yc = std::clamp(y, b.image.lo, b.image.hi);
  if (b.inverse) return std::clamp(b.inverse(yc), b.domain.lo, b.domain.hi);
  double lo = b.domain.lo, hi = b.domain.hi;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = b.map(mid);
    if ((v < yc) == b.increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double BranchMap1D::distance_to_singular(double x) const {
  if (singular_.empty()) return std::numeric_limits<double>::infinity();
  auto it = std::lower_bound(singular_.begin(), singular_.end(), x);
  double d = std::numeric_limits<double>::infinity();
  if (it != singular_.end()) d = std::min(d, std::abs(*it - x));
  if (it != singular_.begin()) d = std::min(d, std::abs(x - *std::prev(it)));
  return d;
}

double BranchMap1D::truncated_distance(double x, double delta) const {
  const double d = distance_to_singular(x);
  return d < delta ? d : 1.0;
}

MapVerification BranchMap1D::verify(int grid, double margin) const {
  MapVerification out;
  out.min_abs_derivative = std::numeric_limits<double>::infinity();
  for (const auto& b : branches_) {
    for (int k = 0; k <= grid; ++k) {
      const double x = b.domain.lo + margin + (b.domain.length() - 2 * margin) * k / grid;
      const double d = std::abs(b.derivative(x));
      out.min_abs_derivative = std::min(out.min_abs_derivative, d);
      if (power_law_) {
        const double dist = distance_to_singular(x);
        if (!std::isfinite(dist) || dist == 0.0) continue;
        const double lower = std::pow(dist, power_law_->beta) / power_law_->B;
        const double upper = power_law_->B * std::pow(dist, -power_law_->beta);
        const double ratio = std::max(lower / d, d / upper);
        out.worst_power_law_ratio = std::max(out.worst_power_law_ratio, ratio);
        if (d < lower || d > upper) out.power_law_ok = false;
      }
    }
  }
  out.expanding = out.min_abs_derivative > 1.0;
  return out;
}

double BranchMap1D::shortest_branch() const {
  double s = std::numeric_limits<double>::infinity();
  for (const auto& b : branches_) s = std::min(s, b.domain.length());
  return s;
}

// --- orbits -----------------------------------------------------------------

Orbit1D::Orbit1D(const BranchMap1D& map, double x0, std::uint64_t seed)
    : map_(&map), x_(x0), bit_state_(seed) {
  if (map.digits() != DigitDynamics::none) {
    require(x0 >= 0.0 && x0 < 1.0, "digit-map orbits start in [0, 1)");
    // Top 53 bits from x0, the low bits and the infinite tail from the seed.
    const auto top = static_cast<std::uint64_t>(std::ldexp(x0, 53));
    std::uint64_t s = seed;
    word_ = (top << 11) | (splitmix64(s) & 0x7ffULL);
    bit_state_ = s;
    refresh_value();
  }
  if (!map.branch_of(x_) || map.is_singular(x_)) defined_ = false;
}

Orbit1D Orbit1D::random(const BranchMap1D& map, Rng& rng) {
  const auto& d = map.domain();
  const std::uint64_t seed = rng();
  if (map.digits() != DigitDynamics::none) {
    Orbit1D o(map, 0.0, seed);
    std::uint64_t s = seed ^ 0x5bd1e995ULL;
    o.word_ = splitmix64(s);
    o.bit_state_ = s;
    o.refresh_value();
    return o;
  }
  const double x = d.lo + (d.hi - d.lo) * uniform01(rng);
  return Orbit1D(map, x, seed);
}

int Orbit1D::next_bit() {
  if (bits_left_ == 0) {
    bit_buffer_ = splitmix64(bit_state_);
    bits_left_ = 64;
  }
  const int b = static_cast<int>(bit_buffer_ & 1ULL);
  bit_buffer_ >>= 1;
  --bits_left_;
  return b;
}

void Orbit1D::refresh_value() { x_ = std::ldexp(static_cast<double>(word_ >> 11), -53); }

bool Orbit1D::step() {
  if (!defined_) return false;
  switch (map_->digits()) {
    case DigitDynamics::doubling: {
      word_ = (word_ << 1) | static_cast<std::uint64_t>(next_bit() ^ flip_);
      refresh_value();
      return true;
    }
    case DigitDynamics::tent: {
      const bool top = (word_ >> 63) != 0;
      word_ = (word_ << 1) | static_cast<std::uint64_t>(next_bit() ^ flip_);
      if (top) {
        word_ = ~word_;
        flip_ ^= 1;
      }
      refresh_value();
      return true;
    }
    case DigitDynamics::none:
      break;
  }
  const auto i = map_->branch_of(x_);
  if (!i) {
    defined_ = false;
    return false;
  }
  x_ = map_->branches()[*i].map(x_);
  if (!map_->branch_of(x_) || map_->is_singular(x_)) {
    defined_ = false;
    return false;
  }
  return true;
}

std::vector<double> orbit_points(const BranchMap1D& map, double x0, std::size_t n,
                                 std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(n);
  Orbit1D o(map, x0, seed);
  for (std::size_t k = 0; k < n && o.defined(); ++k) {
    out.push_back(o.value());
    if (k + 1 < n) o.step();
  }
  return out;
}

// --- standard maps ------------------------------------------------------------

BranchMap1D doubling_map() {
  std::vector<Branch> br;
  br.push_back({{0.0, 0.5}, [](double x) { return 2 * x; }, [](double) { return 2.0; },
                [](double y) { return 0.5 * y; }});
  br.push_back({{0.5, 1.0}, [](double x) { return 2 * x - 1; }, [](double) { return 2.0; },
                [](double y) { return 0.5 * (y + 1); }});
  // As a circle map the doubling map has no singular points.
  return BranchMap1D("doubling", {0.0, 1.0}, std::move(br), {}, std::nullopt,
                     DigitDynamics::doubling);
}

BranchMap1D tent_map() {
  std::vector<Branch> br;
  br.push_back({{0.0, 0.5}, [](double x) { return 2 * x; }, [](double) { return 2.0; },
                [](double y) { return 0.5 * y; }});
  br.push_back({{0.5, 1.0}, [](double x) { return 2 - 2 * x; }, [](double) { return -2.0; },
                [](double y) { return 1 - 0.5 * y; }});
  return BranchMap1D("tent", {0.0, 1.0}, std::move(br), {}, std::nullopt, DigitDynamics::tent);
}

BranchMap1D full_branch_linear(const std::vector<double>& lengths, double offset) {
  require(!lengths.empty(), "need at least one branch length");
  double total = 0;
  for (double l : lengths) {
    require(l > 0, "branch lengths must be positive");
    total += l;
  }
  std::vector<Branch> br;
  std::vector<double> breaks;
  double lo = offset;
  for (double l : lengths) {
    const double a = lo, slope = total / l;
    br.push_back({{a, a + l}, [=](double x) { return offset + slope * (x - a); },
                  [=](double) { return slope; },
                  [=](double y) { return a + (y - offset) / slope; }});
    breaks.push_back(a);
    lo += l;
  }
  breaks.push_back(offset + total);
  return BranchMap1D("full-branch-linear", {offset, offset + total}, std::move(br),
                     std::move(breaks));
}

BranchMap1D glued_two_component_map() {
  const auto a = full_branch_linear({0.3, 0.3, 0.4}, 0.0);
  const auto b = full_branch_linear({0.7, 1.3}, 1.0);
  std::vector<Branch> br = a.branches();
  for (const auto& x : b.branches()) br.push_back(x);
  std::vector<double> sing = a.singular_set();
  for (double s : b.singular_set()) sing.push_back(s);
  sing.erase(std::unique(sing.begin(), sing.end()), sing.end());
  return BranchMap1D("glued-two-component", {0.0, 3.0}, std::move(br), std::move(sing));
}

}  // namespace shlab
