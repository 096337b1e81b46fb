#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "braggkit/cli.hpp"
#include "braggkit/error.hpp"

namespace cli = braggkit::cli;

namespace {

cli::RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw braggkit::ValidationError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw braggkit::ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return cli::RunConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bragg mirror, beamsplitter and Mach-Zehnder optimisation for finite-width clouds"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset_name;
  int threads = -1;
  double clamp = 0.0;
  std::uint64_t seed = 0;
  bool print_config = false, validate_only = false;

  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (default: BRAGGKIT_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--preset", preset_name, "atomic transition preset (rb87-d2)");
  app.add_option("--clamp", clamp, "Rabi frequency clamp Omega_max [w_r]")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for random optimizer restarts");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.add_flag("--validate-only", validate_only, "check the configuration and exit");

  const std::map<std::string, std::string> about{
      {"mirror-optimize", "optimise one mirror pulse (n, sigma)"},
      {"mirror-scan", "optimised mirror fidelity over orders and momentum widths"},
      {"cusp-scan", "off-order loss of optimised mirrors versus momentum width"},
      {"two-level", "two-level pi-pulse fidelity and interferometer G versus w"},
      {"spont-loss", "scattering loss and Rabi frequency bound versus intensity"},
      {"constrained-optimize", "mirror optimisation under a laser power budget"},
      {"mz-optimize", "optimise a Mach-Zehnder sequence and extrapolate G"},
      {"source-compare", "effective G for thermal and condensed sources"}};
  for (const auto& name : cli::subcommands()) {
    app.add_subcommand(name, about.at(name))->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitInvalid;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    cli::RunConfig config = cli::default_config(sub);
    if (!config_path.empty()) {
      cli::RunConfig file = load(config_path);
      if (!file.subcommand.empty() && file.subcommand != sub) {
        throw braggkit::ValidationError("config is for '" + file.subcommand + "', not '" + sub + "'");
      }
      file.subcommand = sub;
      if (!file.clamp && sub == "source-compare" && !app.count("--clamp")) file.clamp = config.clamp;
      config = file;
    }
    if (app.count("--out")) config.out_dir = out_dir;
    if (app.count("--threads")) config.threads = threads;
    if (app.count("--preset")) config.preset = preset_name;
    if (app.count("--clamp")) config.clamp = clamp;
    if (app.count("--seed")) config.seed = seed;

    if (print_config) {
      std::cout << config.to_json().dump(2) << '\n';
      return cli::kExitOk;
    }
    if (validate_only) {
      const auto violations = cli::validate(config);
      for (const auto& v : violations) std::cerr << "invalid config: " << v << '\n';
      if (violations.empty()) std::cout << "ok\n";
      return violations.empty() ? cli::kExitOk : cli::kExitInvalid;
    }
    return cli::run(config, std::cout, std::cerr);
  } catch (const braggkit::ValidationError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return cli::kExitInvalid;
  }
}
