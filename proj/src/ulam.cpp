#include "shlab/ulam.hpp"

#include "shlab/numerics.hpp"
#include "shlab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stack>

namespace shlab {

int UlamChain::bin_of(double x) const {
  const int j = static_cast<int>(std::floor((x - domain.lo) / width()));
  return std::clamp(j, 0, bins - 1);
}

double UlamChain::max_row_sum_error() const {
  double worst = 0.0;
  for (int i = 0; i < transition.outerSize(); ++i) {
    double s = 0.0;
    for (SparseRowMatrix::InnerIterator it(transition, i); it; ++it) s += it.value();
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

UlamChain build_ulam(const BranchMap1D& map, int bins) {
  require(bins >= 16, "Ulam discretization needs N >= 16 bins");
  UlamChain chain;
  chain.domain = map.domain();
  chain.bins = bins;
  chain.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i)
    chain.edges[static_cast<std::size_t>(i)] =
        i == bins ? chain.domain.hi : chain.domain.lo + chain.domain.length() * i / bins;

  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(bins));
  parallel_for(static_cast<std::size_t>(bins), [&](std::size_t row) {
    const double a = chain.edges[row], b = chain.edges[row + 1];
    std::vector<std::pair<int, double>> entries;
    double covered = 0.0;
    for (std::size_t k = 0; k < map.branches().size(); ++k) {
      const auto& br = map.branches()[k];
      const double lo = std::max(a, br.domain.lo), hi = std::min(b, br.domain.hi);
      if (!(hi > lo)) continue;
      covered += hi - lo;
      double ylo = br.map(lo), yhi = br.map(hi);
      if (ylo > yhi) std::swap(ylo, yhi);
      const int jlo = chain.bin_of(ylo), jhi = chain.bin_of(yhi);
      // Preimages of the target-bin edges inside the image, in x order.
      for (int j = jlo; j <= jhi; ++j) {
        const double e0 = std::max(ylo, chain.edges[static_cast<std::size_t>(j)]);
        const double e1 = std::min(yhi, chain.edges[static_cast<std::size_t>(j) + 1]);
        if (!(e1 > e0)) continue;
        double x0 = map.inverse(k, e0), x1 = map.inverse(k, e1);
        x0 = std::clamp(x0, lo, hi);
        x1 = std::clamp(x1, lo, hi);
        const double len = std::abs(x1 - x0);
        if (len > 0.0) entries.emplace_back(j, len);
      }
    }
    if (covered <= 0.0) throw ValidationError("Ulam bin not covered by any branch");
    double total = 0.0;
    for (auto& e : entries) total += e.second;
    if (total <= 0.0) throw NumericalError("Ulam row has zero mass");
    for (auto& e : entries) e.second /= total;
    std::sort(entries.begin(), entries.end());
    // Merge duplicates (two branches landing in the same target bin).
    std::vector<std::pair<int, double>> merged;
    for (const auto& e : entries) {
      if (!merged.empty() && merged.back().first == e.first)
        merged.back().second += e.second;
      else
        merged.push_back(e);
    }
    rows[row] = std::move(merged);
  });

  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < bins; ++i)
    for (const auto& [j, p] : rows[static_cast<std::size_t>(i)]) trip.emplace_back(i, j, p);
  chain.transition.resize(bins, bins);
  chain.transition.setFromTriplets(trip.begin(), trip.end());
  chain.transition.makeCompressed();
  return chain;
}

namespace {

/// Tarjan's strongly connected components, iterative.
std::vector<int> scc_labels(const SparseRowMatrix& p, int& count) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  int next = 0;
  count = 0;
  struct Frame {
    int v;
    SparseRowMatrix::InnerIterator it;
  };
  for (int s = 0; s < n; ++s) {
    if (index[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<Frame> call;
    auto push = [&](int v) {
      index[static_cast<std::size_t>(v)] = low[static_cast<std::size_t>(v)] = next++;
      stack.push_back(v);
      on_stack[static_cast<std::size_t>(v)] = 1;
      call.push_back({v, SparseRowMatrix::InnerIterator(p, v)});
    };
    push(s);
    while (!call.empty()) {
      auto& f = call.back();
      const auto v = static_cast<std::size_t>(f.v);
      if (f.it) {
        const int w = static_cast<int>(f.it.col());
        const double val = f.it.value();
        ++f.it;
        if (val <= 0.0) continue;
        if (index[static_cast<std::size_t>(w)] < 0) {
          push(w);
        } else if (on_stack[static_cast<std::size_t>(w)]) {
          low[v] = std::min(low[v], index[static_cast<std::size_t>(w)]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        for (;;) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp[static_cast<std::size_t>(w)] = count;
          if (w == f.v) break;
        }
        ++count;
      }
      const int done = f.v;
      call.pop_back();
      if (!call.empty()) {
        const auto u = static_cast<std::size_t>(call.back().v);
        low[u] = std::min(low[u], low[static_cast<std::size_t>(done)]);
      }
    }
  }
  return comp;
}

}  // namespace

ErgodicDecomposition stationary_density(const UlamChain& chain, const StationaryOptions& opt) {
  const auto& p = chain.transition;
  const int n = chain.bins;
  int ncomp = 0;
  const auto comp = scc_labels(p, ncomp);

  // A class is closed when no transition leaves it.
  std::vector<char> closed(static_cast<std::size_t>(ncomp), 1);
  for (int i = 0; i < n; ++i)
    for (SparseRowMatrix::InnerIterator it(p, i); it; ++it)
      if (it.value() > 0.0 && comp[static_cast<std::size_t>(it.col())] != comp[static_cast<std::size_t>(i)])
        closed[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])] = 0;

  // Order closed classes by their leftmost bin for a deterministic labelling.
  std::vector<int> first_bin(static_cast<std::size_t>(ncomp), n);
  for (int i = n - 1; i >= 0; --i) first_bin[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])] = i;
  std::vector<int> order;
  for (int c = 0; c < ncomp; ++c)
    if (closed[static_cast<std::size_t>(c)]) order.push_back(c);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return first_bin[static_cast<std::size_t>(a)] < first_bin[static_cast<std::size_t>(b)]; });

  ErgodicDecomposition dec;
  dec.labels.assign(static_cast<std::size_t>(n), -1);
  const SparseRowMatrix pt = p.transpose();  // column access for pi P
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int c = order[k];
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(n);
    int members = 0;
    for (int i = 0; i < n; ++i)
      if (comp[static_cast<std::size_t>(i)] == c) {
        ++members;
        dec.labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
    for (int i = 0; i < n; ++i)
      if (comp[static_cast<std::size_t>(i)] == c) pi[i] = 1.0 / members;
    // Start from Lebesgue on the class: weights proportional to bin length.
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
      Eigen::VectorXd next = pt * pi;
      residual = (next - pi).lpNorm<1>();
      if (residual < opt.tol) {
        pi = next;
        break;
      }
      next = opt.laziness * pi + (1.0 - opt.laziness) * next;
      pi = next / next.sum();
    }
    if (residual >= opt.tol)
      throw ConvergenceError("power iteration did not converge", residual);
    pi /= pi.sum();
    std::vector<double> dens(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) dens[static_cast<std::size_t>(i)] = pi[i] / chain.width();
    dec.densities.push_back(std::move(dens));
    dec.residuals.push_back(residual);
    dec.iterations.push_back(it);
  }
  return dec;
}

DensityReport density_diagnostics(const UlamChain& chain, const std::vector<double>& density,
                                  double threshold) {
  DensityReport r;
  int run_start = -1;
  for (int i = 0; i <= chain.bins; ++i) {
    const bool above = i < chain.bins && density[static_cast<std::size_t>(i)] > threshold;
    if (i < chain.bins) {
      r.sup = std::max(r.sup, density[static_cast<std::size_t>(i)]);
      r.total_mass += density[static_cast<std::size_t>(i)] * chain.width();
    }
    if (above && run_start < 0) run_start = i;
    if (!above && run_start >= 0) {
      r.support.push_back({chain.edges[static_cast<std::size_t>(run_start)], chain.edges[static_cast<std::size_t>(i)]});
      r.longest_support_bins = std::max(r.longest_support_bins, static_cast<double>(i - run_start));
      run_start = -1;
    }
  }
  return r;
}

std::vector<double> coarse_masses(const UlamChain& chain, const std::vector<double>& density,
                                  int coarse) {
  std::vector<double> out(static_cast<std::size_t>(coarse), 0.0);
  const double cw = chain.domain.length() / coarse;
  for (int i = 0; i < chain.bins; ++i) {
    const double a = chain.edges[static_cast<std::size_t>(i)], b = chain.edges[static_cast<std::size_t>(i) + 1];
    int j0 = std::clamp(static_cast<int>(std::floor((a - chain.domain.lo) / cw)), 0, coarse - 1);
    const int j1 = std::clamp(static_cast<int>(std::floor((b - chain.domain.lo) / cw)), 0, coarse - 1);
    for (int j = j0; j <= j1; ++j) {
      const double lo = std::max(a, chain.domain.lo + j * cw);
      const double hi = std::min(b, chain.domain.lo + (j + 1) * cw);
      if (hi > lo) out[static_cast<std::size_t>(j)] += density[static_cast<std::size_t>(i)] * (hi - lo);
    }
  }
  return out;
}

BasinReport basin_coverage(const BranchMap1D& map, const UlamChain& chain,
                           const ErgodicDecomposition& dec, const BasinOptions& opt) {
  require(opt.seeds > 0, "basin coverage needs seeds");
  require(opt.classify_bins >= 2, "classification needs >= 2 bins");
  std::vector<std::vector<double>> targets;
  for (const auto& d : dec.densities) targets.push_back(coarse_masses(chain, d, opt.classify_bins));

  BasinReport rep;
  rep.seeds = opt.seeds;
  rep.labels.assign(static_cast<std::size_t>(opt.seeds), -1);
  rep.distances.assign(static_cast<std::size_t>(opt.seeds), std::numeric_limits<double>::infinity());
  const double cw = chain.domain.length() / opt.classify_bins;
  parallel_for(static_cast<std::size_t>(opt.seeds), [&](std::size_t s) {
    Rng rng(derive_seed(opt.seed, s));
    Orbit1D orbit = Orbit1D::random(map, rng);
    std::vector<double> hist(static_cast<std::size_t>(opt.classify_bins), 0.0);
    long count = 0;
    for (long k = 0; k < opt.iterations; ++k) {
      if (!orbit.defined()) break;
      const int j = std::clamp(static_cast<int>(std::floor((orbit.value() - chain.domain.lo) / cw)), 0,
                               opt.classify_bins - 1);
      hist[static_cast<std::size_t>(j)] += 1.0;
      ++count;
      orbit.step();
    }
    if (!orbit.defined()) {
      rep.labels[s] = -2;
      return;
    }
    for (auto& h : hist) h /= static_cast<double>(count);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < targets.size(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < hist.size(); ++j) d += std::abs(hist[j] - targets[c][j]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    rep.distances[s] = best_d;
    rep.labels[s] = best_d < opt.threshold ? best : -1;
  });

  rep.fractions.assign(dec.components(), 0.0);
  int kept = 0, unclassified = 0;
  for (int l : rep.labels) {
    if (l == -2) {
      ++rep.discarded;
      continue;
    }
    ++kept;
    if (l < 0)
      ++unclassified;
    else
      rep.fractions[static_cast<std::size_t>(l)] += 1.0;
  }
  if (kept > 0) {
    for (auto& f : rep.fractions) f /= kept;
    rep.unclassified = static_cast<double>(unclassified) / kept;
  }
  return rep;
}

double transfer_duality_residual(const UlamChain& chain, const std::vector<double>& density,
                                 int observables, std::uint64_t seed) {
  Eigen::VectorXd pi(chain.bins);
  for (int i = 0; i < chain.bins; ++i) pi[i] = density[static_cast<std::size_t>(i)] * chain.width();
  Rng rng(seed);
  double worst = 0.0;
  for (int o = 0; o < observables; ++o) {
    // Random trigonometric polynomial plus random bin-wise noise, |phi| <= 2.
    const double a = uniform01(rng), f = 1 + 9 * uniform01(rng), ph = 6.283185307179586 * uniform01(rng);
    Eigen::VectorXd phi(chain.bins);
    for (int i = 0; i < chain.bins; ++i) {
      const double x = 0.5 * (chain.edges[static_cast<std::size_t>(i)] + chain.edges[static_cast<std::size_t>(i) + 1]);
      phi[i] = a * std::sin(f * x + ph) + (uniform01(rng) - 0.5);
    }
    const Eigen::VectorXd composed = chain.transition * phi;  // phi o f, bin averages
    worst = std::max(worst, std::abs(pi.dot(composed) - pi.dot(phi)));
  }
  return worst;
}

double integrate_against(const UlamChain& chain, const std::vector<double>& density,
                         const std::function<double(double)>& g) {
  CompensatedSum s;
  for (int i = 0; i < chain.bins; ++i) {
    const double d = density[static_cast<std::size_t>(i)];
    if (d == 0.0) continue;
    s.add(d * gauss_integrate(g, chain.edges[static_cast<std::size_t>(i)], chain.edges[static_cast<std::size_t>(i) + 1], 16));
  }
  return s.value();
}

double lyapunov_from_density(const BranchMap1D& map, const UlamChain& chain,
                             const std::vector<double>& density) {
  return integrate_against(chain, density, [&](double x) {
    const auto b = map.branch_of(x);
    if (!b) return 0.0;
    return std::log(std::abs(map.branches()[*b].derivative(x)));
  });
}

double lyapunov_from_orbits(const BranchMap1D& map, int seeds, long iterations, std::uint64_t seed) {
  std::vector<double> per(static_cast<std::size_t>(seeds), std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t s) {
    Rng rng(derive_seed(seed, s));
    Orbit1D o = Orbit1D::random(map, rng);
    CompensatedSum acc;
    long n = 0;
    for (; n < iterations && o.defined(); ++n) {
      acc.add(std::log(std::abs(map.derivative(o.value()))));
      o.step();
    }
    if (n > 0 && o.defined()) per[s] = acc.value() / static_cast<double>(n);
  });
  std::vector<double> ok;
  for (double v : per)
    if (std::isfinite(v)) ok.push_back(v);
  require(!ok.empty(), "no orbit survived");
  return mean(ok);
}

double density_l1_distance(const UlamChain& a, const std::vector<double>& da, const UlamChain& b,
                           const std::vector<double>& db) {
  require(a.domain.lo == b.domain.lo && a.domain.hi == b.domain.hi, "chains on different domains");
  // Merge the two edge sets; both densities are constant between merged edges.
  std::vector<double> e = a.edges;
  e.insert(e.end(), b.edges.begin(), b.edges.end());
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  CompensatedSum s;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) {
    const double m = 0.5 * (e[k] + e[k + 1]);
    s.add(std::abs(da[static_cast<std::size_t>(a.bin_of(m))] - db[static_cast<std::size_t>(b.bin_of(m))]) * (e[k + 1] - e[k]));
  }
  return s.value();
}

void write_density_csv(std::ostream& os, const UlamChain& chain, const std::vector<double>& density) {
  os << "bin_left,bin_right,density\n";
  for (int i = 0; i < chain.bins; ++i)
    os << fmt_double(chain.edges[static_cast<std::size_t>(i)]) << ','
       << fmt_double(chain.edges[static_cast<std::size_t>(i) + 1]) << ','
       << fmt_double(density[static_cast<std::size_t>(i)]) << '\n';
}

void write_chain_csv(std::ostream& os, const UlamChain& chain) {
  os << "i,j,p\n";
  for (int i = 0; i < chain.transition.outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(chain.transition, i); it; ++it)
      os << i << ',' << it.col() << ',' << fmt_double(it.value()) << '\n';
}

}  // namespace shlab
