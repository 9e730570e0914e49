#include "CLI11.hpp"
#include "commands.hpp"
#include "run_config.hpp"

#include "shlab/common.hpp"

#include <fstream>
#include <iostream>

extern char** environ;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace shlab;
  CLI::App app{"shlab: singular-hyperbolic attractor experiments"};
  app.footer(cli::csv_schemas() +
             "\n\nEnvironment: SHLAB_CFG_<key>=<json> or SHLAB_CFG_<block>__<key>=<json> override\n"
             "config entries; SHLAB_CONFIG, SHLAB_OUT and SHLAB_SEED set the flags.\n"
             "Exit codes: 0 success, 2 validation error, 3 numerical failure.");
  app.require_subcommand(1);

  std::string config_path, out_dir = "shlab-out";
  std::uint64_t seed = 0;
  bool force = false;
  app.add_option("--config", config_path, "JSON run configuration")->envname("SHLAB_CONFIG");
  app.add_option("--out", out_dir, "output directory (must be empty unless --force)")
      ->envname("SHLAB_OUT");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)")->envname("SHLAB_SEED");
  app.add_flag("--force", force, "replace the files of a previous run in --out");
  app.add_flag_callback(
      "--print-defaults", [] {
        std::cout << cli::RunConfig::defaults().dump(2) << '\n';
        std::exit(0);
      },
      "print the default configuration and exit");

  for (const auto& name : cli::command_names()) app.add_subcommand(name, "run " + name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    cli::RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      require(static_cast<bool>(is), "cannot read config " + config_path);
      const auto doc = nlohmann::json::parse(is, nullptr, false);
      require(!doc.is_discarded(), "config " + config_path + " is not valid JSON");
      cfg.merge(doc);
    }
    cfg.apply_environment(environ);
    if (*seed_opt) cfg.set_seed(seed);
    if (app.get_option("--out")->count() > 0 || cfg.output_dir().empty()) cfg.set_output_dir(out_dir);

    const std::string command = app.get_subcommands().front()->get_name();
    const auto man = cli::run(command, cfg, cfg.output_dir(), force);
    for (const auto& [cmd, files] : man.files)
      for (const auto& file : files) std::cout << cmd << ": " << file << '\n';
    std::cout << "manifest: " << cfg.output_dir() << "/manifest.json (config " << man.config_hash << ")\n";
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
