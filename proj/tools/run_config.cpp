#include "run_config.hpp"

#include "shlab/common.hpp"

#include <cstdio>
#include <cstring>
#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace shlab::cli {

using nlohmann::json;

namespace {

struct Range {
  double lo, hi;
  bool integer;
};

// Documented ranges, keyed by "block.key" ("key" for top-level entries).
const std::map<std::string, Range>& ranges() {
  static const std::map<std::string, Range> r = {
      {"seed", {0, 1.8e19, true}},
      {"lorenz.sigma", {1e-3, 1e3, false}},
      {"lorenz.r", {1e-3, 1e4, false}},
      {"lorenz.b", {1e-3, 1e2, false}},
      {"geometric.mu", {1.0 + 1e-12, 2.0, false}},
      {"geometric.lambda1", {1e-6, 1e3, false}},
      {"geometric.lambda2", {-1e3, -1e-6, false}},
      {"geometric.lambda3", {-1e3, -1e-6, false}},
      {"geometric.transit_time", {1e-6, 1e3, false}},
      {"geometric.fold_offset", {0.0, 0.9, false}},
      {"geometric.leaf_gain", {1e-6, 0.5, false}},
      {"simulate.T", {1e-12, 1e6, false}},
      {"simulate.dt", {1e-6, 10, false}},
      {"simulate.tol", {1e-14, 1e-3, false}},
      {"simulate.transient", {0, 1e5, false}},
      {"sections.samples", {10, 1e6, true}},
      {"sections.rho", {1e-6, 10, false}},
      {"sections.lambda", {1e-6, 1.0, false}},
      {"sections.leaf_pairs", {1, 1e6, true}},
      {"sections.grid", {2, 1000, true}},
      {"sections.hits", {10, 1e6, true}},
      {"quotient.grid_n", {16, 1e6, true}},
      {"acim.bins", {16, 1 << 22, true}},
      {"acim.basin_seeds", {1, 1e6, true}},
      {"acim.basin_iterations", {100, 1e8, true}},
      {"hyptimes.b", {0, 10, false}},
      {"hyptimes.c", {1e-9, 10, false}},
      {"hyptimes.delta", {1e-12, 1, false}},
      {"hyptimes.seeds", {1, 1e6, true}},
      {"hyptimes.N", {1000, 1e9, true}},
      {"suspend.samples", {100, 1e8, true}},
      {"suspend.observables", {1, 1000, true}},
      {"suspend.T", {1, 1e8, false}},
      {"suspend.starts", {2, 1e4, true}},
      {"lyapunov.seeds", {1, 1e5, true}},
      {"lyapunov.T", {1, 1e7, false}},
      {"entropy.seeds", {1, 1e5, true}},
      {"entropy.T", {1, 1e7, false}},
      {"density_profile.T", {10, 1e8, false}},
      {"density_profile.bands", {1, 1000, true}},
      {"density_profile.bins", {2, 10000, true}},
      {"density_profile.near_radius", {1e-6, 1, false}},
      {"expansive.epsilon", {1e-6, 10, false}},
      {"expansive.pairs", {1, 1e5, true}},
      {"expansive.T", {0.1, 1e4, false}},
      {"expansive.grid_dt", {1e-5, 0.01, false}},
      {"sensitivity.r0", {1e-15, 1, false}},
      {"sensitivity.delta_s", {1e-12, 1e3, false}},
      {"sensitivity.perturbations", {1, 1e6, true}},
      {"sensitivity.t_cap", {1e-3, 1e6, false}},
  };
  return r;
}

void collect_unknown(const json& defaults, const json& doc, const std::string& prefix,
                     std::vector<std::string>& bad) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) {
      bad.push_back(path + " (unknown key)");
      continue;
    }
    const json& d = defaults.at(it.key());
    const json& v = it.value();
    if (d.is_object()) {
      if (!v.is_object())
        bad.push_back(path + " (expected object)");
      else
        collect_unknown(d, v, path, bad);
    } else if (d.is_number() && !v.is_number()) {
      bad.push_back(path + " (expected number)");
    } else if (d.is_string() && !v.is_string()) {
      bad.push_back(path + " (expected string)");
    } else if (d.is_array() && (!v.is_array() || std::any_of(v.begin(), v.end(), [](const json& e) {
                                  return !e.is_number();
                                }))) {
      bad.push_back(path + " (expected array of numbers)");
    } else if (d.is_boolean() && !v.is_boolean()) {
      bad.push_back(path + " (expected boolean)");
    }
  }
}

void throw_if(const std::vector<std::string>& bad) {
  if (bad.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ValidationError(msg);
}

}  // namespace

json RunConfig::defaults() {
  return json{
      {"schema_version", kSchemaVersion},
      {"seed", 1},
      {"output_dir", ""},
      {"lorenz", {{"sigma", 10.0}, {"r", 28.0}, {"b", 8.0 / 3.0}, {"x0", {1.0, 1.0, 20.0}}}},
      {"geometric",
       {{"mu", 1.95},
        {"lambda1", 1.0},
        {"lambda2", -0.52},
        {"lambda3", -2.0},
        {"transit_time", 1.0},
        {"fold_offset", 0.5},
        {"leaf_gain", 0.05}}},
      {"simulate", {{"T", 50.0}, {"dt", 0.01}, {"tol", 1e-9}, {"transient", 0.0}}},
      {"sections",
       {{"model", "geometric"},
        {"samples", 1000},
        {"rho", 0.2},
        {"lambda", 1.0 / 3.0},
        {"t2_candidates", {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30, 32, 34, 36, 38, 40}},
        {"leaf_pairs", 1000},
        {"grid", 20},
        {"hits", 300}}},
      {"quotient", {{"grid_n", 2000}}},
      {"acim",
       {{"map", "geometric"}, {"bins", 4096}, {"basin_seeds", 500}, {"basin_iterations", 100000}}},
      {"hyptimes", {{"b", 0.02}, {"c", 0.1}, {"delta", 1e-4}, {"seeds", 100}, {"N", 2000}}},
      {"suspend", {{"samples", 20000}, {"observables", 10}, {"T", 2000.0}, {"starts", 10}}},
      {"lyapunov", {{"seeds", 4}, {"T", 1000.0}}},
      {"entropy", {{"seeds", 2}, {"T", 1000.0}}},
      {"density_profile", {{"T", 20000.0}, {"bands", 8}, {"bins", 32}, {"near_radius", 0.1}}},
      {"expansive",
       {{"epsilon", 0.1},
        {"pairs", 50},
        {"T", 100.0},
        {"grid_dt", 0.01},
        {"deltas", {40.0, 20.0, 10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}}}},
      {"sensitivity", {{"r0", 1e-6}, {"delta_s", 1.0}, {"perturbations", 40}, {"t_cap", 60.0}}},
  };
}

RunConfig::RunConfig() : doc_(defaults()) {}

void RunConfig::merge(const json& doc) {
  require(doc.is_object(), "configuration must be a JSON object");
  std::vector<std::string> bad;
  collect_unknown(doc_, doc, "", bad);
  if (doc.contains("schema_version") && doc["schema_version"].is_number() &&
      doc["schema_version"] != kSchemaVersion)
    bad.push_back("schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  throw_if(bad);
  doc_.merge_patch(doc);
}

void RunConfig::apply_environment(char** env) {
  if (!env) return;
  const std::string prefix = "SHLAB_CFG_";
  json patch = json::object();
  for (char** e = env; *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(prefix.size(), eq - prefix.size());
    const std::string raw = entry.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    const auto sep = name.find("__");
    if (sep == std::string::npos)
      patch[name] = value;
    else
      patch[name.substr(0, sep)][name.substr(sep + 2)] = value;
  }
  if (!patch.empty()) merge(patch);
}

void RunConfig::validate() const {
  std::vector<std::string> bad;
  for (const auto& [path, r] : ranges()) {
    const auto dot = path.find('.');
    const json& v = dot == std::string::npos ? doc_.at(path)
                                             : doc_.at(path.substr(0, dot)).at(path.substr(dot + 1));
    const double x = v.get<double>();
    if (!(x >= r.lo && x <= r.hi))
      bad.push_back(path + " = " + v.dump() + " outside [" + json(r.lo).dump() + ", " +
                    json(r.hi).dump() + "]");
    else if (r.integer && !v.is_number_integer())
      bad.push_back(path + " must be an integer");
  }
  const auto model = str("sections", "model");
  if (model != "geometric" && model != "lorenz") bad.push_back("sections.model must be geometric or lorenz");
  const auto map = str("acim", "map");
  if (map != "geometric" && map != "doubling" && map != "tent")
    bad.push_back("acim.map must be geometric, doubling or tent");
  if (doc_.at("lorenz").at("x0").size() != 3) bad.push_back("lorenz.x0 needs three numbers");
  if (num("geometric", "lambda1") + num("geometric", "lambda2") <= 0)
    bad.push_back("geometric: lambda1 + lambda2 must be positive");
  if (num("geometric", "lambda3") >= num("geometric", "lambda2"))
    bad.push_back("geometric: lambda3 must be below lambda2");
  if (list("sections", "t2_candidates").empty()) bad.push_back("sections.t2_candidates is empty");
  for (double d : list("expansive", "deltas"))
    if (!(d > 0)) bad.push_back("expansive.deltas must be positive");
  if (list("expansive", "deltas").empty()) bad.push_back("expansive.deltas is empty");
  if (num("sensitivity", "delta_s") <= num("sensitivity", "r0"))
    bad.push_back("sensitivity: delta_s must exceed r0");
  throw_if(bad);
}

double RunConfig::num(const std::string& block, const std::string& key) const {
  return doc_.at(block).at(key).get<double>();
}

long RunConfig::integer(const std::string& block, const std::string& key) const {
  return doc_.at(block).at(key).get<long>();
}

std::string RunConfig::str(const std::string& block, const std::string& key) const {
  return doc_.at(block).at(key).get<std::string>();
}

std::vector<double> RunConfig::list(const std::string& block, const std::string& key) const {
  return doc_.at(block).at(key).get<std::vector<double>>();
}

std::string RunConfig::hash() const {
  json d = doc_;
  d.erase("output_dir");
  const std::string s = d.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shlab::cli
