#pragma once

#include "run_config.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace shlab::cli {

/// Commands in the order `all` runs them.
const std::vector<std::string>& command_names();

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string command;
  std::map<std::string, std::vector<std::string>> files;  // per command, relative names
  std::map<std::string, double> timings;                 // wall-clock seconds per command
};

/// Prepares `out` (must be empty, or hold a previous run when `force`), runs
/// the command and writes manifest.json. Throws ValidationError or
/// NumericalError.
RunManifest run(const std::string& command, const RunConfig& cfg,
                const std::filesystem::path& out, bool force);

/// CSV schemas per command for --help.
std::string csv_schemas();

}  // namespace shlab::cli
