// pencillab command line: pencillab <command> [--config job.json] [--field value ...]

#include "job.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace {

using pencillab::cli::json;

// Flags that map one-to-one onto config fields.
const std::vector<std::pair<std::string, std::string>> kFieldFlags = {
    {"germ", "germ expression, e.g. \"z1^2+z2^3\" or \"z1*zbar2\""},
    {"n", "number of complex variables (default: inferred)"},
    {"radius", "sphere / ball radius epsilon"},
    {"eta", "tube radius (default 1e-3 * scale)"},
    {"theta", "pencil angle, number or expression such as pi/2"},
    {"budget", "sample budget (Newton seeds for euler)"},
    {"polish_runs", "local refinements of the worst samples"},
    {"seed", "64-bit job seed"},
    {"pass_threshold", "verdict threshold"},
    {"f_floor", "axis exclusion |f| floor for crit-scan"},
    {"direction", "comma-separated real 2n-vector for the radial lambda scan"},
    {"flow_kind", "monodromy | radial | tube"},
    {"t1", "flow end time"},
    {"x0", "comma-separated start point"},
    {"revolutions", "monodromy revolutions"},
    {"starts", "number of start points"},
    {"rtol", "integrator relative tolerance"},
    {"atol", "integrator absolute tolerance"},
    {"fixed_step", "fixed integration step (0 = adaptive)"},
    {"cond_max", "Gram condition limit"},
    {"monitor_tol", "invariant monitor tolerance"},
    {"exponents", "comma-separated Brieskorn exponents for mu"},
    {"count", "number of link samples"},
    {"pole", "comma-separated stereographic pole in R^4"},
    {"report", "report JSON path (default: stdout)"},
    {"csv", "CSV output path"},
    {"obj", "OBJ output path (n = 2)"},
};

int write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) return pencillab::cli::kIo;
  out << text;
  return out ? 0 : static_cast<int>(pencillab::cli::kIo);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pencillab: canonical pencils and Milnor fibrations of polynomial germs"};
  std::string command;
  std::string config_path;
  std::map<std::string, std::string> values;
  app.add_option("command", command, "one of: info dreg milnor-diag strong-milnor tube-check crit-scan flow "
                                     "monodromy equivalence euler mu double-check sample-link");
  app.add_option("--config,-c", config_path, "JSON job file");
  for (const auto& [field, help] : kFieldFlags) {
    std::string name = "--" + field;
    std::replace(name.begin() + 2, name.end(), '_', '-');
    app.add_option_function<std::string>(name, [&values, field = field](const std::string& v) { values[field] = v; },
                                         help);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pencillab::cli::kUsage;
  }

  json flags = json::object();
  if (!command.empty()) flags["command"] = command;
  for (const auto& [field, v] : values) flags[field] = v;

  using pencillab::Error;
  using pencillab::ErrorKind;
  try {
    const auto cfg = pencillab::cli::load_job(config_path, flags);
    auto result = pencillab::cli::run_job(cfg);
    if (result.exit_code != pencillab::cli::kNumerical) pencillab::cli::emit_pointcloud(cfg, result);
    const std::string text = pencillab::cli::dump_report(result.report);
    if (cfg.report_path.empty()) {
      std::cout << text;
    } else if (write_text(cfg.report_path, text) != 0) {
      std::cerr << "error: cannot write " << cfg.report_path << "\n";
      return pencillab::cli::kIo;
    }
    if (result.partial) {
      const std::string path = (cfg.report_path.empty() ? std::string("pencillab-report.json") : cfg.report_path) + ".partial";
      if (write_text(path, pencillab::cli::dump_report(*result.partial)) != 0) {
        std::cerr << "error: cannot write " << path << "\n";
        return pencillab::cli::kIo;
      }
      std::cerr << "numerical failure; partial inventory written to " << path << "\n";
    }
    if (result.exit_code == pencillab::cli::kNumerical) std::cerr << "numerical failure: " << result.report["error"]["message"].get<std::string>() << "\n";
    return result.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::Io) return pencillab::cli::kIo;
    if (e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Precondition) return pencillab::cli::kUsage;
    return pencillab::cli::kNumerical;
  }
}
