#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "projlab/error.hpp"

namespace projlab {

/// Fully resolved parameters of one batch run. Every field has a default;
/// to_json echoes all of them.
struct RunConfig {
  std::string command;
  std::string curve = "model";
  double delta = 0.0;
  double s = 0.5;
  double t = 0.5;
  /// Dimension of the input set for the exceptional-set bound; 0 means "use
  /// the generated set's nominal dimension".
  double alpha = 0.0;
  int theta_grid = 256;
  std::uint64_t seed = 1;
  /// Number of consecutive seeds (incidence, decouple).
  int seeds = 5;
  std::vector<double> deltas;
  /// Point-set generator: cantor, cantor3, random, grid (gen, cover, sweep);
  /// random or origin (incidence).
  std::string generator;
  double ratio = 1.0 / 3.0;
  int dim = 1;
  /// Dimension of random (delta, a)-sets.
  double a = 0.5;
  /// Covering budget (cover) or the incidence exponent slack (incidence).
  double epsilon = 0.0;
  int min_level = 1;
  double margin = 0.1;
  std::string mode = "unit";
  std::filesystem::path out = "out";
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"gen", "cover", "sweep", "incidence", "decouple"};
  return names;
}

nlohmann::json to_json(const RunConfig& cfg);

/// Defaults for the command, then the config file object, then each
/// key=value override in order. Values of overrides are parsed as JSON when
/// possible and kept as strings otherwise. Scales accept numbers or "2^-k".
RunConfig resolve_config(const std::string& command, const nlohmann::json& file,
                         const std::vector<std::string>& overrides);

/// Number or "2^-k" string.
double parse_scale(const nlohmann::json& value);

struct RunResult {
  /// File name (relative to cfg.out) to contents, written in name order.
  std::map<std::string, std::string> files;
  nlohmann::json summary;
};

/// Runs the experiment without touching the file system.
RunResult execute(const RunConfig& cfg, unsigned threads);

/// execute() plus writing every file into cfg.out.
RunResult run(const RunConfig& cfg, unsigned threads);

/// 2 for configuration, domain, range and geometry errors; 3 for infeasible
/// and capacity errors; 1 otherwise.
int exit_code(ErrorKind kind) noexcept;

/// Entry point of the projlab tool. Errors are reported on `err` as a JSON
/// object {"error": {"kind", "message"}}.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace projlab
