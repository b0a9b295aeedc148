#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "conservo/analysis.hpp"
#include "conservo/core.hpp"

namespace conservo {

/// Invalid or inconsistent configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class StudyKind { Convergence, Lambda, InvariantDrift, Snapshot };

enum class ErrorMeasure { Self, Exact, InvariantFinal, InvariantMax };

struct SystemSpec {
  std::string name;
  /// Scalar parameters (omega, eccentricity, beta, ...).
  std::map<std::string, double> scalars;
  /// Vector parameters (y0, position, velocity, domain, grid, wave).
  std::map<std::string, std::vector<double>> vectors;
  /// String parameters (field, potential, initial, data).
  std::map<std::string, std::string> strings;
};

struct MethodEntry {
  MethodSpec spec;
  std::string label;
};

struct ExperimentConfig {
  std::string name;
  StudyKind study = StudyKind::Convergence;
  bool long_tagged = false;
  SystemSpec system;
  std::vector<MethodEntry> methods;

  double h = 0.0;
  std::vector<double> steps;  // explicit levels; otherwise derived from h/levels/ratio
  int levels = 4;
  double ratio = 2.0;
  double horizon = 0.0;
  double long_horizon = 0.0;  // 0: same as horizon
  ErrorMeasure error = ErrorMeasure::Self;
  ErrorNorm norm = ErrorNorm::LInf;
  double floor = kRoundOffFloor;
  long long stride = 1;
  std::vector<double> snapshot_times;
  std::filesystem::path base_dir;

  std::vector<double> step_list() const;
};

/// Parses the TOML text and validates every name it references.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the configured system. Throws ConfigError on unknown names.
ConservativeSystem build_system(const SystemSpec& spec, const std::filesystem::path& base_dir);

const std::vector<std::string>& system_names();

struct RunOptions {
  std::filesystem::path out_dir = "out";
  int jobs = 1;
  bool long_mode = false;
};

struct ExperimentOutcome {
  int exit_code = 0;
  std::vector<std::filesystem::path> files;
  std::string message;
};

/// Runs every (method, step) cell and writes CSV artifacts under out_dir/name.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opts,
                                 std::ostream& log);

/// Loads, validates and runs a config file. Exit codes: 0 success, 2 usage or
/// configuration error, 3 integration failure.
int run_config_file(const std::filesystem::path& path, const RunOptions& opts, std::ostream& log);

}  // namespace conservo
