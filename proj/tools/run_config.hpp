#pragma once

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace shlab::cli {

inline constexpr int kSchemaVersion = 1;

/// Run configuration: defaults merged with a JSON document, environment
/// overrides and command-line flags, in that order. Every key must exist in
/// the default document; values keep the type of their default.
class RunConfig {
 public:
  RunConfig();

  /// Merges a user document. Throws ValidationError listing unknown keys and
  /// type mismatches.
  void merge(const nlohmann::json& doc);
  /// Applies SHLAB_CFG_<key> or SHLAB_CFG_<block>__<key> variables.
  void apply_environment(char** env);
  /// Range checks of every parameter.
  void validate() const;

  const nlohmann::json& doc() const { return doc_; }
  double num(const std::string& block, const std::string& key) const;
  long integer(const std::string& block, const std::string& key) const;
  std::string str(const std::string& block, const std::string& key) const;
  std::vector<double> list(const std::string& block, const std::string& key) const;

  std::uint64_t seed() const { return doc_.at("seed").get<std::uint64_t>(); }
  void set_seed(std::uint64_t s) { doc_["seed"] = s; }
  std::string output_dir() const { return doc_.at("output_dir").get<std::string>(); }
  void set_output_dir(const std::string& d) { doc_["output_dir"] = d; }

  /// FNV-1a 64 of the canonical dump, output directory excluded.
  std::string hash() const;

  static nlohmann::json defaults();

 private:
  nlohmann::json doc_;
};

}  // namespace shlab::cli
