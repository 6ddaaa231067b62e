#include "job.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

namespace pencillab::cli {

namespace {

Error usage(const std::string& field, const std::string& what) {
  return Error(ErrorKind::Precondition, field + ": " + what);
}

bool present(const json& j, const std::string& key) { return j.is_object() && j.contains(key) && !j.at(key).is_null(); }

double to_double(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw usage(field, "expected a number");
}

std::uint64_t to_uint(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() < 0) throw usage(field, "must be non-negative");
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (!s.empty() && s.front() == '-') throw usage(field, "must be non-negative");
    std::size_t used = 0;
    try {
      const unsigned long long u = std::stoull(s, &used);
      if (used == s.size()) return u;
    } catch (const std::exception&) {
    }
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d < 0) throw usage(field, "must be non-negative");
    if (d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw usage(field, "expected a non-negative integer");
}

std::vector<json> to_list(const json& v, const std::string& field) {
  if (v.is_array()) return v.get<std::vector<json>>();
  if (v.is_string()) {
    std::vector<json> out;
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) out.emplace_back(item);
    return out;
  }
  throw usage(field, "expected a list");
}

RealVector to_vector(const json& v, const std::string& field) {
  const auto items = to_list(v, field);
  RealVector out(static_cast<Eigen::Index>(items.size()));
  for (std::size_t k = 0; k < items.size(); ++k) out[static_cast<Eigen::Index>(k)] = to_double(items[k], field);
  return out;
}

json vector_json(const RealVector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json matrix_json(const RealMatrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

std::string to_text(const json& v, const std::string& field) {
  if (!v.is_string()) throw usage(field, "expected a string");
  return v.get<std::string>();
}

const std::set<std::string>& known_fields() {
  static const std::set<std::string> f = {
      "command",   "germ",     "n",           "radius",   "eta",       "theta",       "budget",
      "polish_runs", "seed",   "pass_threshold", "f_floor", "metric",   "direction",   "flow_kind",
      "t1",        "x0",       "revolutions", "starts",   "rtol",      "atol",        "fixed_step",
      "cond_max",  "monitor_tol", "exponents", "count",   "pole",      "report",      "csv",
      "obj"};
  return f;
}

std::uint64_t default_budget(const std::string& command) {
  if (command == "strong-milnor" || command == "tube-check" || command == "crit-scan") return 10'000;
  return 100'000;
}

std::uint64_t default_starts(const std::string& command) {
  if (command == "monodromy") return 50;
  if (command == "equivalence") return 100;
  return 1;
}

bool needs_germ(const std::string& command) { return command != "mu"; }

}  // namespace

double parse_angle(const json& value, const std::string& field) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) throw usage(field, "expected an angle (number or expression such as \"pi/2\")");
  std::string s = value.get<std::string>();
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  static const std::regex re(R"(^([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?(\*?)(pi)?(?:/((?:\d+\.?\d*|\.\d+)))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re) || (!m[2].matched && !m[4].matched) || (m[3].length() > 0 && !(m[2].matched && m[4].matched)))
    throw usage(field, "cannot parse angle \"" + value.get<std::string>() + "\"");
  double a = m[2].matched ? std::stod(m[2].str()) : 1.0;
  if (m[4].matched) a *= std::numbers::pi;
  if (m[5].matched) {
    const double d = std::stod(m[5].str());
    if (d == 0.0) throw usage(field, "division by zero in angle");
    a /= d;
  }
  return m[1].str() == "-" ? -a : a;
}

JobConfig resolve_job(const json& file, const json& flags) {
  if (!file.is_null() && !file.is_object()) throw usage("config", "top level must be a JSON object");
  json merged = file.is_null() ? json::object() : file;
  JobConfig cfg;
  for (const auto& [key, value] : flags.items()) {
    if (value.is_null()) continue;
    if (present(merged, key) && merged.at(key) != value)
      cfg.overrides.push_back({{"field", key}, {"file", merged.at(key)}, {"flag", value}});
    merged[key] = value;
  }
  for (const auto& [key, value] : merged.items())
    if (!known_fields().count(key)) throw usage(key, "unknown field");

  if (!present(merged, "command")) throw usage("command", "missing");
  cfg.command = to_text(merged.at("command"), "command");
  if (std::find(commands().begin(), commands().end(), cfg.command) == commands().end())
    throw usage("command", "unknown command \"" + cfg.command + "\"");

  if (present(merged, "germ")) {
    const json& g = merged.at("germ");
    if (g.is_object()) {
      cfg.germ = germ_from_json(g);
      cfg.germ_text = to_string(*cfg.germ);
      cfg.n_vars = cfg.germ->n_vars();
    } else {
      cfg.germ_text = to_text(g, "germ");
      if (present(merged, "n")) cfg.n_vars = static_cast<std::size_t>(to_uint(merged.at("n"), "n"));
      try {
        if (!present(merged, "n")) cfg.n_vars = infer_n_vars(cfg.germ_text);
        cfg.germ = parse_germ(cfg.germ_text, cfg.n_vars);
      } catch (const ParseError& e) {
        throw Error(ErrorKind::Parse, std::string("germ: ") + e.what());
      } catch (const Error& e) {
        throw usage("germ", e.what());
      }
    }
  } else if (needs_germ(cfg.command)) {
    throw usage("germ", "missing");
  }

  auto num = [&](const char* key, double def) { return present(merged, key) ? to_double(merged.at(key), key) : def; };
  auto whole = [&](const char* key, std::uint64_t def) { return present(merged, key) ? to_uint(merged.at(key), key) : def; };

  cfg.radius = num("radius", 0.5);
  if (!(cfg.radius > 0.0) || !std::isfinite(cfg.radius)) throw usage("radius", "must be positive");
  if (present(merged, "eta")) cfg.eta = to_double(merged.at("eta"), "eta");
  else if (cfg.germ) cfg.eta = 1e-3 * cfg.germ->scale(cfg.radius);
  if (cfg.eta && !(*cfg.eta > 0.0)) throw usage("eta", "must be positive");
  cfg.theta = present(merged, "theta") ? parse_angle(merged.at("theta"), "theta") : 0.0;
  if (!std::isfinite(cfg.theta)) throw usage("theta", "must be finite");
  cfg.budget = whole("budget", default_budget(cfg.command));
  if (cfg.budget == 0) throw usage("budget", "must be a positive integer");
  cfg.polish_runs = whole("polish_runs", 100);
  cfg.seed = whole("seed", 1);
  cfg.pass_threshold = num("pass_threshold", 1e-9);
  if (!(cfg.pass_threshold >= 0.0)) throw usage("pass_threshold", "must be non-negative");
  if (present(merged, "f_floor")) cfg.f_floor = to_double(merged.at("f_floor"), "f_floor");
  else if (cfg.germ) cfg.f_floor = 1e-6 * cfg.germ->scale(cfg.radius);

  const Eigen::Index dim = static_cast<Eigen::Index>(2 * cfg.n_vars);
  if (present(merged, "metric")) {
    const auto rows = to_list(merged.at("metric"), "metric");
    if (static_cast<Eigen::Index>(rows.size()) != dim) throw usage("metric", "must be a 2n x 2n matrix");
    RealMatrix q(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      const RealVector row = to_vector(rows[static_cast<std::size_t>(r)], "metric");
      if (row.size() != dim) throw usage("metric", "must be a 2n x 2n matrix");
      q.row(r) = row.transpose();
    }
    if (!q.isApprox(q.transpose()) || Eigen::LLT<RealMatrix>(q).info() != Eigen::Success)
      throw usage("metric", "must be symmetric positive definite");
    cfg.metric = q;
  } else if (cfg.germ) {
    cfg.metric = RealMatrix::Identity(dim, dim);
  }
  if (present(merged, "direction")) {
    cfg.direction = to_vector(merged.at("direction"), "direction");
    if (cfg.direction->size() != dim || !(cfg.direction->norm() > 0.0))
      throw usage("direction", "must be a nonzero vector of length 2n");
  } else if (cfg.germ) {
    cfg.direction = RealVector::Unit(dim, 0);
  }

  cfg.flow_kind = present(merged, "flow_kind") ? to_text(merged.at("flow_kind"), "flow_kind") : "monodromy";
  if (cfg.flow_kind != "monodromy" && cfg.flow_kind != "radial" && cfg.flow_kind != "tube")
    throw usage("flow_kind", "must be one of monodromy, radial, tube");
  if (present(merged, "t1")) cfg.t1 = to_double(merged.at("t1"), "t1");
  if (present(merged, "x0")) {
    cfg.x0 = to_vector(merged.at("x0"), "x0");
    if (cfg.x0->size() != dim) throw usage("x0", "must have length 2n");
  }
  cfg.revolutions = num("revolutions", 1.0);
  if (!std::isfinite(cfg.revolutions)) throw usage("revolutions", "must be finite");
  cfg.starts = whole("starts", default_starts(cfg.command));
  if (cfg.starts == 0) throw usage("starts", "must be positive");
  cfg.rtol = num("rtol", 1e-10);
  cfg.atol = num("atol", 1e-12);
  if (!(cfg.rtol > 0.0)) throw usage("rtol", "must be positive");
  if (!(cfg.atol > 0.0)) throw usage("atol", "must be positive");
  cfg.fixed_step = num("fixed_step", 0.0);
  if (!(cfg.fixed_step >= 0.0)) throw usage("fixed_step", "must be non-negative");
  cfg.cond_max = num("cond_max", 1e8);
  if (!(cfg.cond_max > 1.0)) throw usage("cond_max", "must exceed 1");
  cfg.monitor_tol = num("monitor_tol", 1e-6);
  if (!(cfg.monitor_tol > 0.0)) throw usage("monitor_tol", "must be positive");

  if (present(merged, "exponents")) {
    for (const json& e : to_list(merged.at("exponents"), "exponents")) cfg.exponents.push_back(to_uint(e, "exponents"));
  } else if (cfg.germ) {
    if (auto b = brieskorn_exponents(*cfg.germ)) cfg.exponents = *b;
  }
  if (cfg.command == "mu" && cfg.exponents.empty()) throw usage("exponents", "missing (and the germ is not Brieskorn)");

  cfg.count = whole("count", 2000);
  if (cfg.count == 0) throw usage("count", "must be positive");
  if (present(merged, "pole")) {
    cfg.pole = to_vector(merged.at("pole"), "pole");
    if (cfg.pole.size() != 4 || !(cfg.pole.norm() > 0.0)) throw usage("pole", "must be a nonzero 4-vector");
  } else {
    cfg.pole = RealVector::Unit(4, 3);
  }
  if (present(merged, "report")) cfg.report_path = to_text(merged.at("report"), "report");
  if (present(merged, "csv")) cfg.csv_path = to_text(merged.at("csv"), "csv");
  if (present(merged, "obj")) cfg.obj_path = to_text(merged.at("obj"), "obj");
  return cfg;
}

JobConfig load_job(const std::string& path, const json& flags) {
  json file;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
    }
  }
  return resolve_job(file, flags);
}

json config_to_json(const JobConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["germ"] = cfg.germ ? json(cfg.germ_text) : json(nullptr);
  j["n"] = cfg.n_vars;
  j["radius"] = cfg.radius;
  j["eta"] = cfg.eta ? json(*cfg.eta) : json(nullptr);
  j["theta"] = cfg.theta;
  j["budget"] = cfg.budget;
  j["polish_runs"] = cfg.polish_runs;
  j["seed"] = cfg.seed;
  j["pass_threshold"] = cfg.pass_threshold;
  j["f_floor"] = cfg.f_floor ? json(*cfg.f_floor) : json(nullptr);
  j["metric"] = cfg.metric ? matrix_json(*cfg.metric) : json(nullptr);
  j["direction"] = cfg.direction ? vector_json(*cfg.direction) : json(nullptr);
  j["flow_kind"] = cfg.flow_kind;
  j["t1"] = cfg.t1 ? json(*cfg.t1) : json(nullptr);
  j["x0"] = cfg.x0 ? vector_json(*cfg.x0) : json(nullptr);
  j["revolutions"] = cfg.revolutions;
  j["starts"] = cfg.starts;
  j["rtol"] = cfg.rtol;
  j["atol"] = cfg.atol;
  j["fixed_step"] = cfg.fixed_step;
  j["cond_max"] = cfg.cond_max;
  j["monitor_tol"] = cfg.monitor_tol;
  j["exponents"] = cfg.exponents;
  j["count"] = cfg.count;
  j["pole"] = vector_json(cfg.pole);
  j["report"] = cfg.report_path.empty() ? json(nullptr) : json(cfg.report_path);
  j["csv"] = cfg.csv_path.empty() ? json(nullptr) : json(cfg.csv_path);
  j["obj"] = cfg.obj_path.empty() ? json(nullptr) : json(cfg.obj_path);
  return j;
}

// ---------------------------------------------------------------------------

namespace {

json scan_json(const ScanReport& r) {
  return {{"min_value", r.min_value},         {"witness", vector_json(r.witness)}, {"budget", r.budget},
          {"usable", r.usable},               {"excluded", r.excluded},            {"inconclusive", r.inconclusive},
          {"excluded_fraction", r.excluded_fraction()}};
}

json transversality_json(const TransversalityReport& r) {
  json j = {{"radius", r.radius},           {"min_defect", r.min_defect},       {"witness", vector_json(r.witness)},
            {"budget", r.budget},           {"samples", r.samples},             {"excluded_axis", r.excluded_axis},
            {"degenerate", r.degenerate},   {"polish_runs", r.polish_runs},     {"inconclusive", r.inconclusive},
            {"histogram", r.histogram}};
  if (r.lambda_checked) {
    j["lambda"] = {{"violations", r.lambda_violations},
                   {"min_colinearity", r.min_colinearity},
                   {"max_abs_arg_when_colinear", r.max_abs_arg_when_colinear}};
  }
  return j;
}

json inventory_json(const MorseInventory& inv) {
  json pts = json::array();
  for (const auto& p : inv.critical_points)
    pts.push_back({{"x", vector_json(p.x)},
                   {"ell_value", p.ell_value},
                   {"lambda_sphere", p.lambda1},
                   {"lambda_pencil", p.lambda2},
                   {"index_sign", p.index_sign},
                   {"residual", p.residual}});
  return {{"critical_points", pts}, {"chi", inv.euler},       {"stability", inv.stability},
          {"batches", inv.batches},  {"seeds_used", inv.seeds_used}, {"newton_failures", inv.newton_failures},
          {"ell", vector_json(inv.ell)}, {"redraws", inv.redraws}, {"theta", inv.theta},
          {"radius", inv.radius}};
}

json mu_json(const MilnorNumberResult& r) {
  return {{"mu", r.mu},
          {"method", r.method == MilnorNumberResult::Method::ClosedForm ? "closed_form" : "staircase"},
          {"exponents", r.exponents}};
}

FlowOptions flow_options(const JobConfig& cfg) {
  FlowOptions o;
  o.cond_max = cfg.cond_max;
  o.monitor_tol = cfg.monitor_tol;
  o.step.rtol = cfg.rtol;
  o.step.atol = cfg.atol;
  if (cfg.fixed_step > 0.0) {
    o.step.fixed_step = true;
    o.step.initial_step = cfg.fixed_step;
  }
  return o;
}

FlowKind flow_kind(const std::string& s) {
  if (s == "radial") return FlowKind::Radial;
  if (s == "tube") return FlowKind::TubeEquivalence;
  return FlowKind::Monodromy;
}

json trace_json(const FlowTrace& tr) {
  return {{"kind", std::string(to_string(tr.kind))},
          {"accepted_steps", tr.accepted_steps},
          {"rejected_steps", tr.rejected_steps},
          {"fallback_steps", tr.fallback_steps},
          {"correction_steps", tr.correction_steps},
          {"max_condition", tr.max_condition},
          {"termination", tr.termination},
          {"norm_drift", tr.norm_drift},
          {"modulus_drift", tr.modulus_drift},
          {"theta_rate_error", tr.theta_rate_error},
          {"theta_drift", tr.theta_drift},
          {"sq_norm_residual", tr.sq_norm_residual},
          {"log_modulus_residual", tr.log_modulus_residual},
          {"max_norm", tr.max_norm},
          {"theta_monotone", tr.theta_monotone},
          {"norm_monotone", tr.norm_monotone},
          {"endpoint", vector_json(tr.back().x)},
          {"samples", tr.samples.size() - 1}};
}

bool trace_ok(const FlowTrace& tr, double tol) {
  const double r0 = tr.samples.front().norm;
  switch (tr.kind) {
    case FlowKind::Monodromy:
      return tr.norm_drift <= tol * r0 && tr.modulus_drift <= tol && tr.theta_monotone;
    case FlowKind::Radial:
      return tr.theta_drift <= tol && tr.sq_norm_residual <= tol;
    case FlowKind::TubeEquivalence:
      return tr.theta_drift <= tol && tr.log_modulus_residual <= tol && tr.norm_monotone;
  }
  return false;
}

RealVector flow_start(const JobConfig& cfg) {
  if (cfg.x0) return *cfg.x0;
  const FiberSample s = sample_fiber(*cfg.germ, cfg.theta, cfg.radius, 1, cfg.seed);
  if (s.points.empty()) throw Error(ErrorKind::ProjectionFailure, "could not sample a start point on the fiber");
  return s.points.front();
}

bool is_numerical(ErrorKind k) { return k != ErrorKind::Parse && k != ErrorKind::Precondition && k != ErrorKind::Io; }

void run_command(const JobConfig& cfg, JobResult& out, json& result, bool& verdict) {
  const std::string& c = cfg.command;
  RegularityOptions ropt;
  ropt.pass_threshold = cfg.pass_threshold;
  ropt.polish_runs = static_cast<std::size_t>(cfg.polish_runs);

  if (c == "info") {
    const MixedGerm& g = *cfg.germ;
    result = {{"germ", to_string(g)},        {"n", g.n_vars()},           {"terms", g.terms().size()},
              {"degree", g.degree()},        {"order", g.order()},        {"holomorphic", g.is_holomorphic()},
              {"scale", g.scale(cfg.radius)}, {"max_abs_coefficient", g.max_abs_coefficient()},
              {"json", to_json(g)}};
    if (auto b = brieskorn_exponents(g)) {
      result["brieskorn_exponents"] = *b;
      result["mu"] = closed_form_mu(*b).mu;
    } else {
      result["brieskorn_exponents"] = nullptr;
    }
    verdict = true;
  } else if (c == "dreg") {
    const auto r = d_regularity_search(*cfg.germ, cfg.radius, *cfg.metric, cfg.budget, cfg.seed, ropt);
    result = transversality_json(r);
    verdict = r.verdict;
  } else if (c == "milnor-diag") {
    require(cfg.germ->is_holomorphic(), "germ: milnor-diag needs a holomorphic germ");
    const auto r = d_regularity_search(*cfg.germ, cfg.radius, *cfg.metric, cfg.budget, cfg.seed, ropt);
    std::vector<double> radii;
    for (int k = 20; k >= 1; --k) radii.push_back(cfg.radius * k / 20.0);
    const auto scan = radial_lambda_scan(*cfg.germ, *cfg.direction, radii, ropt);
    json entries = json::array();
    for (const auto& e : scan.entries) {
      entries.push_back({{"radius", e.radius},
                         {"on_axis", e.on_axis},
                         {"colinearity", e.diagnostic.colinearity},
                         {"arg_lambda_prime", e.diagnostic.arg_lambda_prime}});
    }
    result = {{"search", transversality_json(r)},
              {"radial_scan", {{"entries", entries},
                               {"colinear_flagged", scan.colinear_flagged},
                               {"tail_max_abs_arg", scan.tail_max_abs_arg},
                               {"tail_trend_ok", scan.tail_trend_ok}}}};
    verdict = r.lambda_violations == 0;
  } else if (c == "strong-milnor") {
    const auto r = strong_milnor_check(*cfg.germ, cfg.radius, cfg.budget, cfg.seed, ropt);
    result = scan_json(r);
    verdict = r.verdict;
  } else if (c == "tube-check") {
    const auto r = tube_sphere_transversality(*cfg.germ, cfg.radius, *cfg.eta, cfg.budget, cfg.seed, ropt);
    result = scan_json(r);
    verdict = r.verdict;
  } else if (c == "crit-scan") {
    const auto r = critical_value_isolation_scan(*cfg.germ, cfg.radius, cfg.budget, *cfg.f_floor, cfg.seed, ropt);
    result = scan_json(r.scan);
    result["min_relative_margin"] = r.min_relative_margin;
    verdict = r.scan.verdict;
  } else if (c == "flow") {
    const FlowKind kind = flow_kind(cfg.flow_kind);
    FlowOptions o = flow_options(cfg);
    const RealVector x0 = flow_start(cfg);
    double t1 = 0.0;
    if (cfg.t1) {
      t1 = *cfg.t1;
    } else if (kind == FlowKind::Monodromy) {
      t1 = 2.0 * std::numbers::pi * cfg.revolutions;
    } else if (kind == FlowKind::Radial) {
      t1 = 0.04 * cfg.radius * cfg.radius - x0.squaredNorm();
    } else {
      t1 = std::log(*cfg.eta / std::abs(cfg.germ->value(x0)));
    }
    if (kind == FlowKind::TubeEquivalence) o.ball_radius = cfg.radius;
    out.report["config"]["x0"] = vector_json(x0);
    out.report["config"]["t1"] = t1;
    FlowTrace tr = integrate(*cfg.germ, kind, x0, 0.0, t1, o);
    result = trace_json(tr);
    result["x0"] = vector_json(x0);
    result["t1"] = t1;
    verdict = trace_ok(tr, cfg.monitor_tol);
    out.trace = std::move(tr);
  } else if (c == "monodromy") {
    std::vector<RealVector> starts;
    if (cfg.x0) {
      starts.push_back(*cfg.x0);
    } else {
      starts = sample_fiber(*cfg.germ, cfg.theta, cfg.radius, static_cast<std::size_t>(cfg.starts), cfg.seed).points;
    }
    const FlowOptions o = flow_options(cfg);
    std::vector<std::optional<MonodromyResult>> res(starts.size());
    std::vector<std::string> fail(starts.size());
    parallel_chunks(starts.size(), [&](std::size_t k) {
      try {
        res[k] = monodromy_return(*cfg.germ, starts[k], cfg.revolutions, o);
      } catch (const Error& e) {
        if (!is_numerical(e.kind())) throw;
        fail[k] = std::string(to_string(e.kind())) + ": " + e.what();
      }
    });
    const long expected_winding = std::lround(cfg.revolutions);
    const bool flips = std::lround(2.0 * cfg.revolutions) % 2 != 0;
    json recs = json::array();
    double nd = 0.0, md = 0.0;
    long fallback = 0;
    std::size_t good = 0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
      if (!res[k]) {
        recs.push_back({{"start", vector_json(starts[k])}, {"failure", fail[k]}});
        continue;
      }
      const MonodromyResult& m = *res[k];
      const bool side_ok = (m.start_side_positive != m.end_side_positive) == flips;
      const bool ok = m.winding == expected_winding && side_ok && m.norm_drift <= cfg.monitor_tol * starts[k].norm() &&
                      m.modulus_drift <= cfg.monitor_tol;
      good += ok;
      nd = std::max(nd, m.norm_drift / starts[k].norm());
      md = std::max(md, m.modulus_drift);
      fallback += m.trace.fallback_steps;
      recs.push_back({{"start", vector_json(starts[k])},
                      {"endpoint", vector_json(m.endpoint)},
                      {"winding", m.winding},
                      {"theta_advance", m.theta_advance},
                      {"norm_drift", m.norm_drift},
                      {"modulus_drift", m.modulus_drift},
                      {"start_side_positive", m.start_side_positive},
                      {"end_side_positive", m.end_side_positive},
                      {"fallback_steps", m.trace.fallback_steps},
                      {"ok", ok}});
    }
    result = {{"records", recs},
              {"starts", starts.size()},
              {"passed", good},
              {"max_relative_norm_drift", nd},
              {"max_modulus_drift", md},
              {"fallback_steps", fallback},
              {"expected_winding", expected_winding}};
    verdict = !starts.empty() && good == starts.size();
  } else if (c == "equivalence") {
    const MixedGerm& g = *cfg.germ;
    const SphereSequence seq(2 * g.n_vars(), cfg.seed);
    std::vector<RealVector> starts;
    for (std::uint64_t i = 0; starts.size() < cfg.starts; ++i) {
      if (i >= 100 * cfg.starts) throw usage("eta", "too few sphere points with |f| >= eta");
      RealVector x = cfg.radius * seq.unit(i);
      if (std::abs(g.value(x)) >= *cfg.eta) starts.push_back(std::move(x));
    }
    FlowOptions o = flow_options(cfg);
    const auto recs = equivalence_transport(g, cfg.radius, *cfg.eta, starts, o);
    json arr = json::array();
    std::size_t reached = 0, excursions = 0;
    long corrections = 0;
    double td = 0.0, mx = 0.0;
    for (const auto& r : recs) {
      reached += r.reached_tube;
      excursions += r.excursion;
      corrections += r.correction_steps;
      if (r.reached_tube) {
        td = std::max(td, r.theta_drift);
        out.points.push_back(r.terminal);
      }
      mx = std::max(mx, r.max_norm);
      arr.push_back({{"start", vector_json(r.start)},
                     {"terminal", r.terminal.size() ? vector_json(r.terminal) : json(nullptr)},
                     {"reached_tube", r.reached_tube},
                     {"theta_drift", r.theta_drift},
                     {"max_norm", r.max_norm},
                     {"terminal_modulus", r.terminal_modulus},
                     {"excursion", r.excursion},
                     {"correction_steps", r.correction_steps},
                     {"failure", r.failure}});
    }
    result = {{"records", arr},         {"starts", recs.size()},        {"reached", reached},
              {"excursions", excursions}, {"max_theta_drift", td},       {"max_norm", mx},
              {"correction_steps", corrections}, {"eta", *cfg.eta},      {"samples", out.points.size()}};
    verdict = reached == recs.size() && excursions == 0 && td <= cfg.monitor_tol && mx <= cfg.radius * (1 + 1e-12);
  } else if (c == "euler") {
    MorseOptions mo;
    mo.max_seeds = static_cast<std::size_t>(cfg.budget);
    const auto inv = link_surface_euler(*cfg.germ, cfg.theta, cfg.radius, cfg.seed, mo);
    result = inventory_json(inv);
    verdict = true;
  } else if (c == "mu") {
    const auto a = closed_form_mu(cfg.exponents);
    const auto b = staircase_mu(cfg.exponents);
    result = {{"closed_form", mu_json(a)}, {"staircase", mu_json(b)}, {"mu", a.mu}};
    verdict = a.mu == b.mu;
  } else if (c == "double-check") {
    MorseOptions mo;
    mo.max_seeds = static_cast<std::size_t>(cfg.budget);
    const auto r = double_fiber_consistency(*cfg.germ, cfg.theta, cfg.radius, cfg.seed, mo);
    result = {{"inventory", inventory_json(r.inventory)},
              {"mu_closed_form", r.mu_closed.mu},
              {"mu_staircase", r.mu_staircase.mu},
              {"chi", r.chi},
              {"expected_chi", r.expected_chi},
              {"genus", r.genus},
              {"irreducible", r.irreducible}};
    verdict = r.pass;
  } else if (c == "sample-link") {
    const FiberSample s = sample_fiber(*cfg.germ, cfg.theta, cfg.radius, static_cast<std::size_t>(cfg.count), cfg.seed);
    result = {{"requested", s.requested}, {"dropped", s.dropped}, {"samples", s.points.size()}};
    out.points = s.points;
    verdict = true;
  }
}

}  // namespace

JobResult run_job(const JobConfig& cfg) {
  JobResult out;
  json result;
  bool verdict = false;
  out.report = {{"schema", "1"},
                {"version", kVersion},
                {"command", cfg.command},
                {"config", config_to_json(cfg)},
                {"overrides", cfg.overrides},
                {"warnings", json::array()}};
  try {
    run_command(cfg, out, result, verdict);
    out.report["result"] = result;
    out.report["verdict"] = verdict;
    out.exit_code = verdict ? kPass : kFailedVerdict;
  } catch (const MorseError& e) {
    out.report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
    out.partial = out.report;
    (*out.partial)["partial_inventory"] = inventory_json(e.partial());
    out.exit_code = kNumerical;
  } catch (const Error& e) {
    if (!is_numerical(e.kind())) throw;
    out.report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
    out.exit_code = kNumerical;
  }
  return out;
}

std::size_t emit_pointcloud(const JobConfig& cfg, JobResult& result) {
  std::size_t rows = 0;
  json outputs = json::object();
  if (!cfg.csv_path.empty()) {
    std::ofstream csv(cfg.csv_path);
    if (!csv) throw Error(ErrorKind::Io, "cannot write " + cfg.csv_path);
    if (result.trace) {
      FlowTrace steps = *result.trace;
      steps.samples.erase(steps.samples.begin());
      write_trace_csv(csv, steps);
      rows = steps.samples.size();
    } else {
      write_points_csv(csv, *cfg.germ, result.points);
      rows = result.points.size();
    }
    if (!csv) throw Error(ErrorKind::Io, "write failed for " + cfg.csv_path);
    outputs["csv"] = {{"path", cfg.csv_path}, {"rows", rows}};
  }
  if (!cfg.obj_path.empty()) {
    require(cfg.germ && cfg.germ->n_vars() == 2, "obj: OBJ output needs n = 2");
    std::vector<RealVector> pts = result.points;
    if (result.trace)
      for (std::size_t k = 1; k < result.trace->samples.size(); ++k) pts.push_back(result.trace->samples[k].x);
    const PoleChoice pole = choose_pole(*cfg.germ, cfg.theta, cfg.radius, cfg.pole);
    if (pole.perturbed) {
      const std::string w = "projection pole lies on the surface; perturbed";
      result.warnings.push_back(w);
      result.report["warnings"].push_back(w);
    }
    std::ofstream obj(cfg.obj_path);
    if (!obj) throw Error(ErrorKind::Io, "cannot write " + cfg.obj_path);
    write_obj(obj, pts, pole.pole);
    if (!obj) throw Error(ErrorKind::Io, "write failed for " + cfg.obj_path);
    outputs["obj"] = {{"path", cfg.obj_path}, {"vertices", pts.size()}, {"pole", vector_json(pole.pole)}};
  }
  if (!outputs.empty()) result.report["outputs"] = outputs;
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

void dump_value(const json& j, std::string& out, int level) {
  const std::string pad(static_cast<std::size_t>(2 * (level + 1)), ' ');
  const std::string close(static_cast<std::size_t>(2 * level), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump_value(it.value(), out, level + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t k = 0; k < j.size(); ++k) {
          if (k) out += ", ";
          dump_value(j[k], out, level + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        dump_value(j[k], out, level + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      const double d = j.get<double>();
      out += std::isfinite(d) ? detail::format_double(d) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_report(const json& j) {
  std::string out;
  dump_value(j, out, 0);
  out += "\n";
  return out;
}

}  // namespace pencillab::cli
