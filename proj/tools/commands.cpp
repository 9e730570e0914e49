#include "commands.hpp"

#include "shlab/ergodic.hpp"
#include "shlab/expansive.hpp"
#include "shlab/hyperbolic.hpp"
#include "shlab/models.hpp"
#include "shlab/numerics.hpp"
#include "shlab/section.hpp"
#include "shlab/suspension.hpp"
#include "shlab/ulam.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>

namespace shlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kManifest = "manifest.json";

class Context {
 public:
  Context(const RunConfig& cfg, fs::path out) : cfg(cfg), out_(std::move(out)) {}

  const RunConfig& cfg;

  void begin(const std::string& command) { current_ = command; }

  /// Writes one output file and records it for the current command.
  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path p = out_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + p.string());
    body(os);
    os.close();
    if (!os) throw NumericalError("failed writing " + p.string());
    files_[current_].push_back(name);
  }

  void write_json(const std::string& name, const json& j) {
    write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  std::map<std::string, std::vector<std::string>>& files() { return files_; }

  FlowSystem lorenz() const {
    return lorenz_field(cfg.num("lorenz", "sigma"), cfg.num("lorenz", "r"), cfg.num("lorenz", "b"));
  }

  Vec3 x0() const {
    const auto v = cfg.list("lorenz", "x0");
    return {v[0], v[1], v[2]};
  }

  GeometricLorenzSpec spec() const {
    GeometricLorenzSpec s;
    s.eigenvalues.lambda1 = cfg.num("geometric", "lambda1");
    s.eigenvalues.lambda2 = cfg.num("geometric", "lambda2");
    s.eigenvalues.lambda3 = cfg.num("geometric", "lambda3");
    s.mu = cfg.num("geometric", "mu");
    s.transit_time = cfg.num("geometric", "transit_time");
    s.fold_offset = cfg.num("geometric", "fold_offset");
    s.leaf_gain = cfg.num("geometric", "leaf_gain");
    s.validate();
    return s;
  }

  std::uint64_t seed() const { return cfg.seed(); }

 private:
  fs::path out_;
  std::string current_;
  std::map<std::string, std::vector<std::string>> files_;
};

// Box coordinates (x1, x2) on the ingoing section of the geometric model.
SectionPoint box_point(double x1, double x2) { return {0, Vec2(0.5 * (x2 + 1), 0.5 * (x1 + 1))}; }

std::string f(double v) { return fmt_double(v); }

void cmd_simulate(Context& c) {
  const auto l = c.lorenz();
  const double T = c.cfg.num("simulate", "T"), dt = c.cfg.num("simulate", "dt");
  const double tol = c.cfg.num("simulate", "tol"), transient = c.cfg.num("simulate", "transient");
  require(T > 0, "simulate: T must be positive");
  const Vec3 start = transient > 0 ? flow_to(l, c.x0(), transient, tol) : c.x0();
  std::vector<std::pair<double, Vec3>> pts;
  sample_orbit(l, start, T, dt, [&](double t, const Vec3& x) { pts.emplace_back(t, x); }, tol);
  c.write("trajectory.csv", [&](std::ostream& os) {
    os << "t,x,y,z\n";
    for (const auto& [t, x] : pts) os << f(t) << ',' << f(x[0]) << ',' << f(x[1]) << ',' << f(x[2]) << '\n';
  });
}

void write_section_checks(std::ostream& os, const std::vector<SectionCheck>& checks) {
  os << "section,min_image_distance,min_transversality,adaptedness,injective,transverse,adapted\n";
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const auto& s = checks[k];
    os << k << ',' << f(s.min_image_distance) << ',' << f(s.min_transversality) << ','
       << f(s.adaptedness) << ',' << s.injective << ',' << s.transverse << ',' << s.adapted << '\n';
  }
}

void cmd_sections(Context& c) {
  const int grid = static_cast<int>(c.cfg.integer("sections", "grid"));
  const int n_hits = static_cast<int>(c.cfg.integer("sections", "hits"));
  const int pairs = static_cast<int>(c.cfg.integer("sections", "leaf_pairs"));
  json summary;
  std::vector<SectionCheck> checks;
  LeafContraction lc;
  if (c.cfg.str("sections", "model") == "lorenz") {
    const auto l = c.lorenz();
    const FlowReturnSystem sys(l, lorenz_sections(l));
    const auto hits = attractor_hits(sys, {0, Vec2(0.5, 0.5)}, n_hits);
    for (int s = 0; s < static_cast<int>(sys.sections().size()); ++s)
      checks.push_back(check_section(sys, s, grid, hits, true));
    lc = leaf_contraction(sys, hits, pairs, 0.05, c.seed());
  } else {
    const GeometricLorenzFlow g(c.spec());
    const auto hits = attractor_hits(g, box_point(0.3, 0.1), n_hits);
    checks.push_back(check_section(g, 0, grid, hits));
    lc = leaf_contraction(g, hits, pairs, 0.05, c.seed());
    ConeOptions o;
    o.rho = c.cfg.num("sections", "rho");
    o.samples = static_cast<int>(c.cfg.integer("sections", "samples"));
    o.seed = c.seed();
    const double lambda = c.cfg.num("sections", "lambda");
    const auto cal = calibrate_t2(g, o, c.cfg.list("sections", "t2_candidates"), lambda);
    c.write("cones.csv", [&](std::ostream& os) {
      os << "t2,rho,max_width,min_expansion,vectors,rejected\n";
      for (const auto& r : cal.reports)
        os << f(r.t2) << ',' << f(r.rho) << ',' << f(r.max_width) << ',' << f(r.min_expansion) << ','
           << r.vectors << ',' << r.rejected << '\n';
    });
    summary["cone_calibration"] = {{"found", cal.found}, {"t2", cal.t2}, {"lambda", lambda}};
  }
  c.write("sections.csv", [&](std::ostream& os) { write_section_checks(os, checks); });
  summary["leaf_contraction"] = {{"max_ratio", lc.max_ratio}, {"mean_ratio", lc.mean_ratio},
                                 {"pairs", lc.pairs}, {"rejected", lc.rejected}};
  c.write_json("sections.json", summary);
}

void cmd_quotient(Context& c) {
  const GeometricLorenzFlow g(c.spec());
  QuotientOptions q;
  q.grid_n = static_cast<int>(c.cfg.integer("quotient", "grid_n"));
  const auto res = quotient_map(g, q);
  c.write("return_table.csv", [&](std::ostream& os) { write_return_table_csv(os, res.table); });
  c.write_json("quotient.json", {{"gamma0", res.gamma0},
                                 {"holes", res.holes.size()},
                                 {"boundary_exponents", res.boundary_exponents},
                                 {"min_abs_derivative", res.min_abs_derivative},
                                 {"max_tau_near_boundary", res.max_tau_near_boundary},
                                 {"branches", res.map.branches().size()}});
}

BranchMap1D acim_map(const Context& c) {
  const auto name = c.cfg.str("acim", "map");
  if (name == "doubling") return doubling_map();
  if (name == "tent") return tent_map();
  return geometric_lorenz_map(c.spec());
}

void cmd_acim(Context& c) {
  const auto map = acim_map(c);
  const auto chain = build_ulam(map, static_cast<int>(c.cfg.integer("acim", "bins")));
  const auto dec = stationary_density(chain);
  if (dec.components() == 0) throw NumericalError("acim: no invariant density found");
  for (std::size_t k = 0; k < dec.components(); ++k)
    c.write(k == 0 ? "density.csv" : "density_" + std::to_string(k) + ".csv",
            [&](std::ostream& os) { write_density_csv(os, chain, dec.densities[k]); });
  BasinOptions bo;
  bo.seeds = static_cast<int>(c.cfg.integer("acim", "basin_seeds"));
  bo.iterations = c.cfg.integer("acim", "basin_iterations");
  bo.seed = c.seed();
  const auto basins = basin_coverage(map, chain, dec, bo);
  json comps = json::array();
  for (std::size_t k = 0; k < dec.components(); ++k) {
    const auto rep = density_diagnostics(chain, dec.densities[k]);
    json support = json::array();
    for (const auto& s : rep.support) support.push_back({s.lo, s.hi});
    comps.push_back({{"sup", rep.sup},
                     {"total_mass", rep.total_mass},
                     {"support", support},
                     {"residual", dec.residuals[k]},
                     {"duality_residual", transfer_duality_residual(chain, dec.densities[k], 100, c.seed())},
                     {"lyapunov", lyapunov_from_density(map, chain, dec.densities[k])}});
  }
  c.write_json("acim.json", {{"map", map.name()},
                             {"bins", chain.bins},
                             {"components", comps},
                             {"basin_fractions", basins.fractions},
                             {"unclassified", basins.unclassified},
                             {"discarded", basins.discarded}});
}

HTParams ht_params(const Context& c) {
  HTParams p;
  p.b = c.cfg.num("hyptimes", "b");
  p.c = c.cfg.num("hyptimes", "c");
  p.delta = c.cfg.num("hyptimes", "delta");
  return p;
}

void cmd_hyptimes(Context& c) {
  const auto map = geometric_lorenz_map(c.spec());
  const auto p = ht_params(c);
  const auto ens = ht_frequency(map, static_cast<int>(c.cfg.integer("hyptimes", "seeds")),
                                c.cfg.integer("hyptimes", "N"), p, c.seed());
  long bad = 0;
  for (const auto& r : ens.records) bad += recheck_quad(map, r, p);
  c.write("hyperbolic_times.csv", [&](std::ostream& os) { write_ht_csv(os, ens.records); });
  c.write_json("hyptimes.json", {{"theta_min", ens.theta_min},
                                 {"theta_mean", ens.theta_mean},
                                 {"theta_max", ens.theta_max},
                                 {"positive", ens.positive},
                                 {"seeds", ens.records.size()},
                                 {"quad_recheck_failures", bad}});
}

void cmd_suspend(Context& c) {
  const auto sp = c.spec();
  const auto base = geometric_lorenz_map(sp);
  const Suspension sus(base, exit_time_roof(sp));
  const auto m = lift_orbit_measure(base, sus.roof(), 0.3,
                                    static_cast<std::size_t>(c.cfg.integer("suspend", "samples")), c.seed());
  const auto phis = trig_observables(static_cast<int>(c.cfg.integer("suspend", "observables")), c.seed());
  const double T = c.cfg.num("suspend", "T");
  std::vector<EvaluationRow> rows;
  std::vector<std::array<double, 3>> gaps;
  for (std::size_t k = 0; k < phis.size(); ++k) {
    const auto e = m.evaluate(phis[k]);
    rows.push_back({"phi" + std::to_string(k), e});
    const auto ta = flow_time_average(sus, {0.7, 0.0}, phis[k], T, c.seed());
    if (ta.terminated) throw NumericalError("suspend: time average hit the singular set");
    gaps.push_back({ta.value, e.value, std::abs(ta.value - e.value)});
  }
  c.write("evaluations.csv", [&](std::ostream& os) { write_evaluations_csv(os, rows); });
  c.write("time_averages.csv", [&](std::ostream& os) {
    os << "observable_id,time_average,lifted,abs_gap\n";
    for (std::size_t k = 0; k < gaps.size(); ++k)
      os << rows[k].id << ',' << f(gaps[k][0]) << ',' << f(gaps[k][1]) << ',' << f(gaps[k][2]) << '\n';
  });
  const auto tr = ergodicity_transfer(sus, phis[0], static_cast<int>(c.cfg.integer("suspend", "starts")), T,
                                      c.seed());
  c.write_json("suspend.json", {{"mean_roof", m.mean_roof()},
                                {"excluded", m.excluded()},
                                {"truncated_mass", m.truncated_mass()},
                                {"invariance_deviation", invariance_test(m, sus, phis, {1.0})},
                                {"transfer_worst_z", tr.worst_z},
                                {"transfer_pairs", tr.pairs},
                                {"transfer_pairs_above_3", tr.pairs_above_3}});
}

void cmd_lyapunov(Context& c) {
  const auto l = c.lorenz();
  const auto seeds = uniform_seeds(l, static_cast<int>(c.cfg.integer("lyapunov", "seeds")), c.seed());
  const auto rep = spectrum_structure(l, seeds, c.cfg.num("lyapunov", "T"));
  c.write("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, rep); });
  c.write_json("lyapunov.json", {{"all_ok", rep.all_ok},
                                 {"worst_zero_exponent", rep.worst_zero_exponent},
                                 {"worst_divergence_gap", rep.worst_divergence_gap}});
}

void cmd_entropy(Context& c) {
  const auto l = c.lorenz();
  const auto seeds = uniform_seeds(l, static_cast<int>(c.cfg.integer("entropy", "seeds")), c.seed());
  const auto rep = entropy_formula_check(l, seeds, c.cfg.num("entropy", "T"));
  c.write("entropy.csv", [&](std::ostream& os) {
    os << "seed_index,qr,unstable,cu_det,max_rel_dev,quality\n";
    for (std::size_t k = 0; k < rep.records.size(); ++k) {
      const auto& r = rep.records[k];
      os << k << ',' << f(r.qr) << ',' << f(r.unstable) << ',' << f(r.cu_det) << ',' << f(r.max_rel_dev)
         << ',' << f(r.quality) << '\n';
    }
  });
  const GeometricLorenzFlow g(c.spec());
  const auto ab = abramov_check(g, 5000, c.seed());
  c.write_json("entropy.json", {{"worst_rel_dev", rep.worst_rel_dev},
                                {"abramov",
                                 {{"map_exponent", ab.map_exponent},
                                  {"flow_exponent", ab.flow_exponent},
                                  {"mean_return_time", ab.mean_return_time},
                                  {"rel_dev", ab.rel_dev}}}});
}

void cmd_density_profile(Context& c) {
  const GeometricLorenzFlow g(c.spec());
  const auto r = unstable_density_profile(g, c.cfg.num("density_profile", "T"),
                                          static_cast<int>(c.cfg.integer("density_profile", "bands")),
                                          static_cast<int>(c.cfg.integer("density_profile", "bins")),
                                          c.cfg.num("density_profile", "near_radius"), c.seed());
  c.write("density_profile.csv", [&](std::ostream& os) { write_profile_csv(os, r.coarse); });
  c.write("density_profile_fine.csv", [&](std::ostream& os) { write_profile_csv(os, r.fine); });
  c.write_json("density_profile.json", {{"sup_coarse", r.sup_coarse},
                                        {"sup_fine", r.sup_fine},
                                        {"refinement_ratio", r.refinement_ratio},
                                        {"near_density", r.near_density},
                                        {"median_density", r.median_density},
                                        {"bounded", r.bounded},
                                        {"decays", r.decays}});
}

void cmd_expansive(Context& c) {
  ExpansivenessOptions o;
  o.T = c.cfg.num("expansive", "T");
  o.grid_dt = c.cfg.num("expansive", "grid_dt");
  o.deltas = c.cfg.list("expansive", "deltas");
  const auto rep = expansiveness_probe(c.lorenz(), c.cfg.num("expansive", "epsilon"),
                                       static_cast<int>(c.cfg.integer("expansive", "pairs")), c.x0(),
                                       c.seed(), o);
  c.write("violations.csv", [&](std::ostream& os) { write_violation_csv(os, rep.curve); });
  c.write("pairs.csv", [&](std::ostream& os) {
    os << "pair,control,shift,start_distance,sup_distance,unaligned_distance,pruned,witness,witness_offset\n";
    for (std::size_t k = 0; k < rep.pairs.size(); ++k) {
      const auto& p = rep.pairs[k];
      os << k << ',' << p.control << ',' << f(p.shift) << ',' << f(p.start_distance) << ','
         << f(p.alignment.sup_distance) << ',' << f(p.alignment.unaligned_distance) << ','
         << p.alignment.pruned << ',' << p.witness.found << ',' << f(p.witness.offset) << '\n';
    }
  });
  c.write_json("expansive.json", {{"epsilon", rep.epsilon},
                                  {"delta_hat", rep.delta_hat},
                                  {"controls", rep.controls},
                                  {"controls_synchronized", rep.controls_synchronized}});
}

void cmd_sensitivity(Context& c) {
  const auto l = c.lorenz();
  const Vec3 x = flow_to(l, c.x0(), 50.0);
  const double lam = qr_lyapunov(l, x, 1000.0).exponents[0];
  const auto rep = sensitivity_probe(l, x, c.cfg.num("sensitivity", "r0"), c.cfg.num("sensitivity", "delta_s"),
                                     static_cast<int>(c.cfg.integer("sensitivity", "perturbations")), lam,
                                     c.cfg.num("sensitivity", "t_cap"), c.seed());
  c.write("sensitivity.csv", [&](std::ostream& os) {
    os << "perturbation,separation_time\n";
    for (std::size_t k = 0; k < rep.times.size(); ++k) os << k << ',' << f(rep.times[k]) << '\n';
  });
  c.write_json("sensitivity.json", {{"lambda_plus", lam},
                                    {"median", rep.median},
                                    {"predicted", rep.predicted},
                                    {"rel_dev", rep.rel_dev},
                                    {"capped", rep.capped}});
}

const std::vector<std::pair<std::string, std::function<void(Context&)>>>& table() {
  static const std::vector<std::pair<std::string, std::function<void(Context&)>>> t = {
      {"simulate", cmd_simulate},       {"sections", cmd_sections},
      {"quotient", cmd_quotient},       {"acim", cmd_acim},
      {"hyptimes", cmd_hyptimes},       {"suspend", cmd_suspend},
      {"lyapunov", cmd_lyapunov},       {"entropy", cmd_entropy},
      {"density-profile", cmd_density_profile}, {"expansive", cmd_expansive},
      {"sensitivity", cmd_sensitivity},
  };
  return t;
}

void prepare_output(const fs::path& out, bool force) {
  if (!fs::exists(out)) {
    fs::create_directories(out);
    return;
  }
  require(fs::is_directory(out), "output path is not a directory: " + out.string());
  if (fs::is_empty(out)) return;
  require(force, "output directory " + out.string() + " is not empty (use --force to replace a previous run)");
  require(fs::exists(out / kManifest),
          "--force only replaces a previous run; " + out.string() + " has no manifest.json");
  for (const auto& e : fs::directory_iterator(out)) {
    require(e.is_regular_file(), "refusing to clear " + out.string() + ": it contains subdirectories");
  }
  for (const auto& e : fs::directory_iterator(out)) fs::remove(e.path());
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, fn] : table()) v.push_back(n);
    v.push_back("all");
    return v;
  }();
  return names;
}

RunManifest run(const std::string& command, const RunConfig& cfg, const fs::path& out, bool force) {
  const auto& names = command_names();
  require(std::find(names.begin(), names.end(), command) != names.end(), "unknown command: " + command);
  cfg.validate();
  prepare_output(out, force);

  Context ctx(cfg, out);
  RunManifest man;
  man.config_hash = cfg.hash();
  man.version = kVersion;
  man.command = command;
  for (const auto& [name, fn] : table()) {
    if (command != "all" && command != name) continue;
    ctx.begin(name);
    const auto t0 = std::chrono::steady_clock::now();
    fn(ctx);
    man.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  man.files = ctx.files();
  for (const auto& [cmd, list] : man.files)
    for (const auto& name : list)
      if (!fs::exists(out / name) || fs::file_size(out / name) == 0)
        throw NumericalError("output " + name + " of " + cmd + " is missing or empty");

  json j{{"schema_version", kSchemaVersion},
         {"artifact_version", man.version},
         {"config_hash", man.config_hash},
         {"command", man.command},
         {"config", cfg.doc()},
         {"files", man.files},
         {"timings_s", man.timings}};
  std::ofstream os(out / kManifest);
  os << j.dump(2) << '\n';
  if (!os) throw NumericalError("failed writing manifest");
  return man;
}

std::string csv_schemas() {
  return R"(CSV outputs (header row, fixed column order):
  simulate         trajectory.csv         t,x,y,z
  sections         sections.csv           section,min_image_distance,min_transversality,adaptedness,injective,transverse,adapted
                   cones.csv              t2,rho,max_width,min_expansion,vectors,rejected (geometric model)
  quotient         return_table.csv       branch_id,x,f_x,tau,r
  acim             density.csv            bin_left,bin_right,density (one row per bin; density_<k>.csv per extra component)
  hyptimes         hyperbolic_times.csv   seed,n_k,theta (n_k is ';'-separated)
  suspend          evaluations.csv        observable_id,estimate,stderr,n_samples
                   time_averages.csv      observable_id,time_average,lifted,abs_gap
  lyapunov         spectrum.csv           seed_x,seed_y,seed_z,lambda_plus,lambda_zero,lambda_minus,mean_divergence,structure_ok
  entropy          entropy.csv            seed_index,qr,unstable,cu_det,max_rel_dev,quality
  density-profile  density_profile.csv    strip,band_lo,band_hi,bin,cu_lo,cu_hi,distance,count,density
                   density_profile_fine.csv  same columns, twice the bins
  expansive        violations.csv         delta,n_pairs_close,n_violations
                   pairs.csv              pair,control,shift,start_distance,sup_distance,unaligned_distance,pruned,witness,witness_offset
  sensitivity      sensitivity.csv        perturbation,separation_time
Every command also writes <command>.json summaries; manifest.json lists all files.)";
}

}  // namespace shlab::cli
