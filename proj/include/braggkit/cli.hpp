#pragma once

// Command-line front end: JSON run configurations, orchestration of the
// numerical modules, and CSV / JSON / plot-data output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace braggkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitInfeasible = 3;

const std::vector<std::string>& subcommands();

struct RunConfig {
  std::string subcommand;
  // Subcommand parameter block. Missing keys take the defaults of
  // default_params(subcommand); unknown keys are violations.
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path out_dir = "out";
  int threads = 0;  // 0: BRAGGKIT_THREADS, else hardware concurrency
  std::string preset = "rb87-d2";
  std::optional<double> clamp;  // Omega_max [w_r]
  std::uint64_t seed = 0;       // random optimizer restarts

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

nlohmann::json default_params(const std::string& subcommand);

// Defaults for the subcommand, including the clamp used by source-compare.
RunConfig default_config(const std::string& subcommand);

// Field-level violations; empty when the config is runnable.
std::vector<std::string> validate(const RunConfig& config);

// Runs the subcommand, writes its artifacts into out_dir and prints a one-line
// digest. Returns one of the kExit codes; error messages go to `errors`.
int run(const RunConfig& config, std::ostream& digest, std::ostream& errors);

}  // namespace braggkit::cli
