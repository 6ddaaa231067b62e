#pragma once

// Job layer of the pencillab command line: configuration, dispatch, reports.

#include "pencillab/pencillab.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pencillab::cli {

using nlohmann::json;

enum ExitCode : int { kPass = 0, kFailedVerdict = 1, kUsage = 2, kNumerical = 3, kIo = 4 };

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"info",        "dreg",       "milnor-diag", "strong-milnor", "tube-check",
                                             "crit-scan",   "flow",       "monodromy",   "equivalence",   "euler",
                                             "mu",          "double-check", "sample-link"};
  return c;
}

struct JobConfig {
  std::string command;
  std::string germ_text;
  std::size_t n_vars = 0;
  double radius = 0.5;
  std::optional<double> eta;  // default 1e-3 * scale(radius)
  double theta = 0.0;
  std::uint64_t budget = 0;   // command dependent default
  std::uint64_t polish_runs = 100;
  std::uint64_t seed = 1;
  double pass_threshold = 1e-9;
  std::optional<double> f_floor;  // crit-scan, default 1e-6 * scale(radius)
  std::optional<RealMatrix> metric;
  std::optional<RealVector> direction;  // milnor-diag radial scan
  std::string flow_kind = "monodromy";
  std::optional<double> t1;
  std::optional<RealVector> x0;
  double revolutions = 1.0;
  std::uint64_t starts = 0;  // command dependent default
  double rtol = 1e-10;
  double atol = 1e-12;
  double fixed_step = 0.0;  // > 0: fixed-step integration with this step
  double cond_max = 1e8;
  double monitor_tol = 1e-6;
  std::vector<std::uint64_t> exponents;
  std::uint64_t count = 2000;
  RealVector pole;
  std::string report_path;
  std::string csv_path;
  std::string obj_path;

  std::optional<MixedGerm> germ;
  json overrides = json::array();  // fields given both in the file and as flags
};

/// Merges `file` (may be null) with `flags` (flags win) and validates.
/// Throws Error(Parse | Precondition) naming the offending field.
JobConfig resolve_job(const json& file, const json& flags);

/// Reads the JSON config at `path` (empty: none) and resolves it with `flags`.
JobConfig load_job(const std::string& path, const json& flags);

json config_to_json(const JobConfig& cfg);

struct JobResult {
  json report;
  int exit_code = kPass;
  std::optional<json> partial;  // written to <report>.partial on numerical failure
  std::vector<RealVector> points;
  std::optional<FlowTrace> trace;
  std::vector<std::string> warnings;
};

/// Runs the job. Numerical failures are returned with exit code 3 and an error
/// report; precondition failures propagate as Error.
JobResult run_job(const JobConfig& cfg);

/// Writes CSV / OBJ outputs requested by the config; returns the number of
/// rows written to the CSV. Throws Error(Io).
std::size_t emit_pointcloud(const JobConfig& cfg, JobResult& result);

/// JSON text with every double printed to 17 significant digits and keys sorted.
std::string dump_report(const json& j);

/// Angle from a number or an expression like "pi/2", "-3*pi/4", "2pi", "0.25".
double parse_angle(const json& value, const std::string& field);

}  // namespace pencillab::cli
