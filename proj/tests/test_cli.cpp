#include "job.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

using namespace pencillab;
using namespace pencillab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / ("pencillab_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p, const std::string& prefix = "") {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) ++n;
  return n;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PENCILLAB_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string error_message(const json& file, const json& flags) {
  try {
    (void)resolve_job(file, flags);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Angle, Expressions) {
  constexpr double pi = std::numbers::pi;
  EXPECT_EQ(parse_angle("pi/2", "theta"), pi / 2);
  EXPECT_EQ(parse_angle("-3*pi/4", "theta"), -3 * pi / 4);
  EXPECT_EQ(parse_angle("2pi", "theta"), 2 * pi);
  EXPECT_EQ(parse_angle("0.25", "theta"), 0.25);
  EXPECT_EQ(parse_angle(1.5, "theta"), 1.5);
  EXPECT_EQ(parse_angle(" pi ", "theta"), pi);
  EXPECT_THROW((void)parse_angle("pie", "theta"), Error);
  EXPECT_THROW((void)parse_angle("pi/0", "theta"), Error);
  EXPECT_THROW((void)parse_angle("*pi", "theta"), Error);
}

TEST(Config, EulerJob) {
  const JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"}, {"command", "euler"}, {"theta", "pi/2"}}, json::object());
  EXPECT_EQ(cfg.command, "euler");
  EXPECT_EQ(cfg.n_vars, 2U);
  EXPECT_EQ(cfg.theta, std::numbers::pi / 2);
  ASSERT_TRUE(cfg.germ);
  EXPECT_EQ(*cfg.germ, parse_germ("z1^2+z2^3", 2));
  EXPECT_EQ(cfg.budget, 100000U);
  EXPECT_EQ(cfg.exponents, (std::vector<std::uint64_t>{2, 3}));
  // defaults are materialized
  const json j = config_to_json(cfg);
  for (const char* key : {"radius", "eta", "theta", "budget", "seed", "pass_threshold", "rtol", "atol", "metric"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Config, ValidationNamesField) {
  const json base = {{"germ", "z1^2+z2^3"}, {"command", "dreg"}};
  json neg = base;
  neg["budget"] = -5;
  EXPECT_NE(error_message(neg, json::object()).find("budget"), std::string::npos);
  EXPECT_NE(error_message(base, {{"budget", "-5"}}).find("budget"), std::string::npos);
  EXPECT_NE(error_message(base, {{"radius", "abc"}}).find("radius"), std::string::npos);
  EXPECT_NE(error_message(base, {{"bogus", 1}}).find("bogus"), std::string::npos);
  EXPECT_NE(error_message({{"command", "euler"}}, json::object()).find("germ"), std::string::npos);
  EXPECT_NE(error_message({{"command", "dance"}, {"germ", "z1"}}, json::object()).find("command"), std::string::npos);
  EXPECT_NE(error_message(base, {{"x0", "1,2,3"}}).find("x0"), std::string::npos);
  EXPECT_NE(error_message(base, {{"germ", "z1 + 1"}}).find("germ"), std::string::npos);
}

TEST(Config, FlagsWinAndAreRecorded) {
  const JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"}, {"command", "dreg"}, {"budget", 500}, {"seed", 3}},
                                    {{"budget", "700"}, {"seed", 3}});
  EXPECT_EQ(cfg.budget, 700U);
  EXPECT_EQ(cfg.seed, 3U);
  ASSERT_EQ(cfg.overrides.size(), 1U);
  EXPECT_EQ(cfg.overrides[0]["field"], "budget");
  EXPECT_EQ(cfg.overrides[0]["file"], 500);
  EXPECT_EQ(cfg.overrides[0]["flag"], "700");
  const JobResult r = run_job(cfg);
  EXPECT_EQ(r.report["overrides"], cfg.overrides);
  EXPECT_EQ(r.report["config"]["budget"], 700);
}

TEST(Config, ReportReplaysIdentically) {
  const JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"}, {"command", "dreg"}, {"budget", 3000}, {"seed", 9}}, json::object());
  const JobResult a = run_job(cfg);
  const JobResult b = run_job(cfg);
  EXPECT_EQ(dump_report(a.report), dump_report(b.report));
  // the embedded config alone reproduces the run
  const JobResult c = run_job(resolve_job(a.report["config"], json::object()));
  EXPECT_EQ(dump_report(c.report["result"]), dump_report(a.report["result"]));
  EXPECT_EQ(a.report["schema"], "1");
  EXPECT_EQ(a.report["version"], kVersion);
}

TEST(Config, FlowDefaultsAreMaterialized) {
  const JobResult a = run_job(resolve_job({{"germ", "z1^2+z2^3"}, {"command", "flow"}, {"flow_kind", "radial"}}, json::object()));
  ASSERT_EQ(a.exit_code, kPass);
  EXPECT_TRUE(a.report["config"]["x0"].is_array());
  EXPECT_TRUE(a.report["config"]["t1"].is_number());
  const JobResult b = run_job(resolve_job(a.report["config"], json::object()));
  EXPECT_EQ(dump_report(a.report), dump_report(b.report));
}

TEST(Report, SeventeenDigits) {
  const std::string text = dump_report({{"b", 0.1}, {"a", std::vector<double>{1.0 / 3.0, 2.0}}});
  EXPECT_NE(text.find("0.10000000000000001"), std::string::npos);
  EXPECT_NE(text.find("0.33333333333333331"), std::string::npos);
  EXPECT_LT(text.find("\"a\""), text.find("\"b\""));
  EXPECT_EQ(json::parse(text)["b"].get<double>(), 0.1);
}

TEST(Run, EulerChi) {
  const JobResult r = run_job(resolve_job({{"germ", "z1^2+z2^3"}, {"command", "euler"}, {"theta", "pi/2"}, {"seed", 7}}, json::object()));
  EXPECT_EQ(r.exit_code, kPass);
  EXPECT_EQ(r.report["result"]["chi"], -2);
}

TEST(Run, NegativeControlFailsVerdict) {
  const JobResult r = run_job(
      resolve_job({{"germ", "z1*zbar1 + i*z1^2*zbar1^2"}, {"command", "dreg"}, {"budget", 2000}}, json::object()));
  EXPECT_EQ(r.exit_code, kFailedVerdict);
  EXPECT_EQ(r.report["verdict"], false);
}

TEST(Run, UnstableWritesPartial) {
  const JobResult r =
      run_job(resolve_job({{"germ", "z1^2+z2^3"}, {"command", "euler"}, {"budget", 400}}, json::object()));
  EXPECT_EQ(r.exit_code, kNumerical);
  ASSERT_TRUE(r.partial);
  EXPECT_EQ((*r.partial)["error"]["kind"], "Unstable");
  EXPECT_TRUE(r.partial->contains("partial_inventory"));
}

TEST(Emit, SampleLinkCounts) {
  const fs::path dir = scratch();
  JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"}, {"command", "sample-link"}, {"theta", "pi/2"}, {"count", 2000}},
                              json::object());
  cfg.csv_path = (dir / "link.csv").string();
  cfg.obj_path = (dir / "link.obj").string();
  JobResult r = run_job(cfg);
  ASSERT_EQ(r.exit_code, kPass);
  const std::size_t rows = emit_pointcloud(cfg, r);
  const std::size_t samples = r.report["result"]["samples"];
  EXPECT_EQ(samples, 2000U);
  EXPECT_EQ(rows, samples);
  EXPECT_EQ(count_lines(cfg.obj_path, "v "), samples);
  EXPECT_EQ(count_lines(cfg.csv_path), samples + 1);
  EXPECT_EQ(r.report["outputs"]["obj"]["vertices"], samples);
}

TEST(Emit, FlowTraceRowsMatchSteps) {
  const fs::path dir = scratch();
  JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"},
                               {"command", "flow"},
                               {"flow_kind", "monodromy"},
                               {"x0", "0.3,0.1,-0.2,0.25"},
                               {"fixed_step", 2 * std::numbers::pi / 500}},
                              json::object());
  cfg.csv_path = (dir / "trace.csv").string();
  JobResult r = run_job(cfg);
  ASSERT_EQ(r.exit_code, kPass) << dump_report(r.report);
  ASSERT_TRUE(r.trace);
  EXPECT_EQ(r.trace->accepted_steps, 500);
  EXPECT_EQ(emit_pointcloud(cfg, r), 500U);
  EXPECT_EQ(count_lines(cfg.csv_path), 501U);
}

TEST(Emit, PoleOnSurfaceIsPerturbed) {
  const fs::path dir = scratch();
  // f(r, 0) = r^2 is real, so e1 lies on X_0
  JobConfig cfg = resolve_job(
      {{"germ", "z1^2+z2^3"}, {"command", "sample-link"}, {"count", 50}, {"pole", "1,0,0,0"}}, json::object());
  cfg.obj_path = (dir / "pole.obj").string();
  JobResult r = run_job(cfg);
  emit_pointcloud(cfg, r);
  ASSERT_EQ(r.warnings.size(), 1U);
  EXPECT_NE(r.warnings[0].find("pole"), std::string::npos);
  EXPECT_EQ(r.report["warnings"].size(), 1U);
  EXPECT_NE(r.report["outputs"]["obj"]["pole"][0].get<double>(), 1.0);
}

TEST(Emit, UnwritablePathIsIoError) {
  JobConfig cfg = resolve_job({{"germ", "z1^2+z2^3"}, {"command", "sample-link"}, {"count", 10}}, json::object());
  cfg.csv_path = "/nonexistent-dir/x.csv";
  JobResult r = run_job(cfg);
  try {
    emit_pointcloud(cfg, r);
    FAIL() << "expected Io";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch();
  const std::string rep = (dir / "r.json").string();
  EXPECT_EQ(run_cli("mu --exponents 3,4,5 --report " + rep), 0);
  EXPECT_EQ(json::parse(slurp(rep))["result"]["mu"], 24);
  EXPECT_EQ(run_cli("euler --germ 'z1^2+z2^3' --theta pi/2 --seed 7 --report " + rep), 0);
  EXPECT_EQ(json::parse(slurp(rep))["result"]["chi"], -2);
  EXPECT_EQ(run_cli("dreg --germ 'z1*zbar1 + i*z1^2*zbar1^2' --budget 2000 --report " + rep), 1);
  EXPECT_EQ(json::parse(slurp(rep))["verdict"], false);
  EXPECT_EQ(run_cli("dreg --germ 'z1^2+z2^3' --budget -3"), 2);
  EXPECT_EQ(run_cli("dreg --germ 'z1^2+'"), 2);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
  const std::string unstable = (dir / "u.json").string();
  EXPECT_EQ(run_cli("euler --germ 'z1^2+z2^3' --budget 400 --report " + unstable), 3);
  EXPECT_TRUE(fs::exists(unstable + ".partial"));
  EXPECT_EQ(run_cli("info --germ z1 --report /nonexistent-dir/r.json"), 4);

  const fs::path job = dir / "job.json";
  std::ofstream(job) << R"({"command": "info", "germ": "z1^2+z2^3", "radius": 0.25})";
  EXPECT_EQ(run_cli("--config " + job.string() + " --radius 0.3 --report " + rep), 0);
  const json report = json::parse(slurp(rep));
  EXPECT_EQ(report["config"]["radius"], 0.3);
  EXPECT_EQ(report["overrides"][0]["field"], "radius");
}
