#include "shlab/numerics.hpp"
#include "shlab/parallel.hpp"
#include "shlab/section.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74 pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include <limits>
#include <memory>
#include <ostream>

namespace shlab {

namespace {

struct Eval {
  bool ok = false;
  int image_section = -1;
  double fx = 0.0;
  double tau = 0.0;
  int r = 0;
};

Eval evaluate(const ReturnSystem& system, int section, double u0, double v, double t_min) {
  const auto cr = composite_return(system, {section, Vec2(u0, v)}, t_min, false);
  Eval e;
  e.tau = cr.sample.tau;
  if (!cr.sample.ok()) return e;
  e.ok = true;
  e.image_section = cr.sample.image.section;
  e.fx = system.sections()[e.image_section].leaf(cr.sample.image.uv[1]);
  e.tau = cr.sample.tau;
  e.r = cr.sample.crossings;
  return e;
}

// Whether m belongs with a rather than b.
bool with_left(const Eval& m, const Eval& a, const Eval& b) {
  if (m.ok != a.ok) return false;
  if (!m.ok) return true;
  if (!b.ok) return m.image_section == a.image_section;
  if (m.image_section != a.image_section) return false;
  if (m.image_section != b.image_section) return true;
  return std::abs(m.fx - a.fx) < std::abs(m.fx - b.fx);
}

struct Knot {
  double x, y;
};

Branch make_branch(Interval domain, std::vector<Knot> knots) {
  std::sort(knots.begin(), knots.end(), [](const Knot& a, const Knot& b) { return a.x < b.x; });
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](const Knot& a, const Knot& b) { return a.x == b.x; }),
              knots.end());
  require(knots.size() >= 2, "quotient branch needs at least two knots");
  std::vector<double> xs, ys;
  for (const auto& k : knots) {
    xs.push_back(k.x);
    ys.push_back(k.y);
  }
  const double lo = xs.front(), hi = xs.back();
  Branch b;
  b.domain = domain;
  if (xs.size() >= 4) {
    using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
    auto p = std::make_shared<Pchip>(std::move(xs), std::move(ys));
    b.map = [p, lo, hi](double x) { return (*p)(std::clamp(x, lo, hi)); };
    b.derivative = [p, lo, hi](double x) { return p->prime(std::clamp(x, lo, hi)); };
  } else {
    auto lin = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(xs, ys);
    auto locate = [lin](double x) {
      const auto& X = lin->first;
      const auto it = std::upper_bound(X.begin() + 1, X.end() - 1, x);
      return static_cast<std::size_t>(it - X.begin()) - 1;
    };
    b.map = [lin, locate, lo, hi](double x) {
      x = std::clamp(x, lo, hi);
      const std::size_t i = locate(x);
      const auto& X = lin->first;
      const auto& Y = lin->second;
      return Y[i] + (Y[i + 1] - Y[i]) * (x - X[i]) / (X[i + 1] - X[i]);
    };
    b.derivative = [lin, locate, lo, hi](double x) {
      const std::size_t i = locate(std::clamp(x, lo, hi));
      const auto& X = lin->first;
      const auto& Y = lin->second;
      return (Y[i + 1] - Y[i]) / (X[i + 1] - X[i]);
    };
  }
  return b;
}

}  // namespace

double local_exponent(const ReturnSystem& system, int section, double u0, double g, int side,
                      double d_min, double d_max, int points) {
  require(side == 1 || side == -1, "side must be +1 or -1");
  require(points >= 3 && d_min > 0 && d_max > d_min, "invalid local exponent sampling");
  const auto& s = system.sections().at(section);
  std::vector<double> ld, ly;
  for (int k = 0; k < points; ++k) {
    const double d = d_min * std::pow(d_max / d_min, double(k) / (points - 1));
    const auto a = evaluate(system, section, u0, s.leaf_to_v(g + side * d), 0.0);
    const auto b = evaluate(system, section, u0, s.leaf_to_v(g + side * 2 * d), 0.0);
    if (!a.ok || !b.ok || a.image_section != b.image_section) continue;
    const double diff = std::abs(b.fx - a.fx);
    if (diff <= 0) continue;
    ld.push_back(std::log(d));
    ly.push_back(std::log(diff));
  }
  require(ld.size() >= 3, "too few valid samples for a local exponent fit");
  return linear_fit(ld, ly).first;
}

QuotientResult quotient_map(const ReturnSystem& system, const QuotientOptions& opt) {
  const auto& secs = system.sections();
  require(opt.grid_n >= 16, "quotient grid needs at least 16 cells");
  std::vector<double> u0 = opt.cu_edge;
  if (u0.empty()) u0.assign(secs.size(), 0.5);
  require(u0.size() == secs.size(), "one cu edge per section");

  double dom_lo = std::numeric_limits<double>::infinity(), dom_hi = -dom_lo, total = 0.0;
  for (const auto& s : secs) {
    dom_lo = std::min(dom_lo, s.leaf_interval().lo);
    dom_hi = std::max(dom_hi, s.leaf_interval().hi);
    total += s.leaf_interval().length();
  }

  std::vector<Branch> branches;
  std::vector<ReturnRow> table;
  std::vector<double> gamma0, holes, exponents;
  double min_slope = std::numeric_limits<double>::infinity(), max_tau_edge = 0.0;

  for (int si = 0; si < static_cast<int>(secs.size()); ++si) {
    const auto& s = secs[si];
    const int n = opt.grid_n;
    auto eval = [&](double v) { return evaluate(system, si, u0[si], v, opt.t_min); };
    std::vector<Eval> cell(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) { cell[i] = eval((i + 0.5) / n); });

    struct Segment {
      std::size_t a, b;  // cell range
      std::vector<Knot> extra;
      double lo, hi;  // physical boundaries
    };
    const double jump = opt.jump_fraction * total;
    auto separated = [&](const Eval& x, const Eval& y) {
      return !x.ok || !y.ok || x.image_section != y.image_section || std::abs(x.fx - y.fx) > jump;
    };
    struct Split {
      double g, va, vb;
      Eval ea, eb;
    };
    // Boundary between v_a (class of a) and v_b: bisection to the straddle width.
    auto bisect = [&](double va, Eval ea, double vb, Eval eb) {
      const double width = opt.straddle / s.leaf_interval().length();
      while (vb - va > width) {
        const double vm = 0.5 * (va + vb);
        const Eval em = eval(vm);
        if (with_left(em, ea, eb)) {
          va = vm;
          ea = em;
        } else {
          vb = vm;
          eb = em;
        }
      }
      const double g = s.leaf(0.5 * (va + vb));
      gamma0.push_back(g);
      return Split{g, va, vb, ea, eb};
    };
    auto close_right = [&](Segment& seg, const Split& sp) {
      seg.hi = sp.g;
      if (sp.ea.ok) {
        seg.extra.push_back({s.leaf(sp.va), sp.ea.fx});
        max_tau_edge = std::max(max_tau_edge, sp.ea.tau);
      }
    };
    auto close_left = [&](Segment& seg, const Split& sp) {
      seg.lo = sp.g;
      if (sp.eb.ok) {
        seg.extra.push_back({s.leaf(sp.vb), sp.eb.fx});
        max_tau_edge = std::max(max_tau_edge, sp.eb.tau);
      }
    };
    auto v_of = [&](std::size_t c) { return (c + 0.5) / n; };

    gamma0.push_back(s.leaf_interval().lo);
    gamma0.push_back(s.leaf_interval().hi);
    std::vector<Segment> segs;
    for (std::size_t c = 0; c < static_cast<std::size_t>(n); ++c) {
      if (!cell[c].ok) {
        holes.push_back(s.leaf(v_of(c)));
        continue;
      }
      if (!segs.empty() && segs.back().b + 1 == c && !separated(cell[c - 1], cell[c]))
        segs.back().b = c;
      else
        segs.push_back({c, c, {}, s.leaf_interval().lo, s.leaf_interval().hi});
    }
    for (std::size_t k = 0; k < segs.size(); ++k) {
      auto& seg = segs[k];
      if (k == 0 && seg.a > 0)
        close_left(seg, bisect(v_of(seg.a - 1), cell[seg.a - 1], v_of(seg.a), cell[seg.a]));
      if (k + 1 < segs.size() && segs[k + 1].a == seg.b + 1) {
        const auto sp = bisect(v_of(seg.b), cell[seg.b], v_of(seg.b + 1), cell[seg.b + 1]);
        close_right(seg, sp);
        close_left(segs[k + 1], sp);
        continue;
      }
      if (seg.b + 1 < static_cast<std::size_t>(n))
        close_right(seg, bisect(v_of(seg.b), cell[seg.b], v_of(seg.b + 1), cell[seg.b + 1]));
      if (k + 1 < segs.size()) {
        auto& nx = segs[k + 1];
        close_left(nx, bisect(v_of(nx.a - 1), cell[nx.a - 1], v_of(nx.a), cell[nx.a]));
      }
    }
    // Section ends: evaluate just inside the chart.
    if (!segs.empty()) {
      if (segs.front().a == 0) {
        const Eval e0 = eval(1e-9);
        if (e0.ok && !separated(e0, cell[0])) segs.front().extra.push_back({s.leaf(1e-9), e0.fx});
      }
      if (segs.back().b + 1 == static_cast<std::size_t>(n)) {
        const Eval e1 = eval(1.0 - 1e-9);
        if (e1.ok && !separated(e1, cell[n - 1]))
          segs.back().extra.push_back({s.leaf(1.0 - 1e-9), e1.fx});
      }
    }

    for (const auto& seg : segs) {
      const int id = static_cast<int>(branches.size());
      std::vector<Knot> knots = seg.extra;
      for (std::size_t c = seg.a; c <= seg.b; ++c) {
        const double x = s.leaf(v_of(c));
        knots.push_back({x, cell[c].fx});
        table.push_back({id, x, cell[c].fx, cell[c].tau, cell[c].r});
        if (c > seg.a)
          min_slope = std::min(min_slope, std::abs(cell[c].fx - cell[c - 1].fx) /
                                              (x - s.leaf(v_of(c - 1))));
      }
      if (knots.size() < 2) continue;
      branches.push_back(make_branch({seg.lo, seg.hi}, std::move(knots)));
    }
  }

  std::sort(gamma0.begin(), gamma0.end());
  gamma0.erase(std::unique(gamma0.begin(), gamma0.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               gamma0.end());

  // Local exponents on both sides of interior boundaries.
  for (double g : gamma0) {
    for (int si = 0; si < static_cast<int>(secs.size()); ++si) {
      const auto& iv = secs[si].leaf_interval();
      if (!(g > iv.lo && g < iv.hi)) continue;
      for (int side : {-1, 1}) {
        try {
          exponents.push_back(local_exponent(system, si, u0[si], g, side));
        } catch (const ValidationError&) {
        }
      }
    }
  }

  QuotientResult out{BranchMap1D(system.name() + "-quotient", {dom_lo, dom_hi}, std::move(branches),
                                 gamma0),
                     std::move(table),
                     gamma0,
                     std::move(holes),
                     std::move(exponents),
                     min_slope,
                     max_tau_edge};
  return out;
}

void write_return_table_csv(std::ostream& os, const std::vector<ReturnRow>& table) {
  os << "branch_id,x,f_x,tau,r\n";
  for (const auto& r : table)
    os << r.branch << ',' << fmt_double(r.x) << ',' << fmt_double(r.f_x) << ','
       << fmt_double(r.tau) << ',' << r.r << '\n';
}

}  // namespace shlab
