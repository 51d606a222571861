#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homlab/experiments.hpp"

namespace homlab {

enum class Command { cell, solve, sweep, eig, report };
std::string to_string(Command c);

/// Exit statuses of a run.
enum ExitCode : int { exit_ok = 0, exit_validation = 2, exit_solver = 3, exit_verdict = 4 };

/// One run = one output directory. Parsed from a JSON object; every key not
/// listed here or in Sweep is rejected.
///
///   command      cell | solve | sweep | eig | report (required)
///   experiment   sweep only: one of experiment_names() [dirichlet]
///   boundary     solve only: dirichlet | neumann [dirichlet]
///   eps          number (solve, eig) or decreasing list (sweep, eig)
///   flux         cell only: also compute B and the flux correctors [false]
///   svg          write log-log plots of studies [true]
///   fields       write grid-files of correctors / solutions [true]
///   runs         report only: run directories to collect
///   out, jobs, seed, strict   defaults for the command-line flags
/// plus the Sweep keys (family, params, grid, domain, cells_per_eps, ...).
struct RunConfig {
  Command command = Command::cell;
  std::string experiment = "dirichlet";
  BoundaryKind boundary = BoundaryKind::dirichlet;
  std::optional<double> single_eps;
  bool flux = false;
  bool svg = true;
  bool fields = true;
  std::vector<std::string> runs;
  std::string out = "run";
  bool strict = false;
  Sweep sweep;

  /// Parse and validate; throws ValidationError before any compute.
  static RunConfig from_json(const nlohmann::json& j);
  void validate() const;
  nlohmann::json to_json() const;
};

/// Command-line overrides; unset fields keep the config value.
struct RunOverrides {
  std::optional<std::string> out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

/// Read the config file, apply overrides, run the command and write the
/// artifacts under the output directory. manifest.json is written on every
/// path that can reach a writable directory. Returns the exit status.
int execute(const std::string& config_path, const RunOverrides& overrides);
int execute(const nlohmann::json& config, const RunOverrides& overrides);

/// Manifest for a run that failed before its config could be read.
void write_failure_manifest(const std::string& out, int code, const std::string& message);

/// Version strings of the tool and the libraries it was built against.
nlohmann::json build_versions();

/// RFC 4180 field: quoted when it contains a comma, quote or line break.
std::string csv_field(const std::string& s);

}  // namespace homlab
