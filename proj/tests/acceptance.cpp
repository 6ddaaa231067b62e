// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "pencillab/pencillab.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

using namespace pencillab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 0.5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

MixedGerm brieskorn(unsigned a, unsigned b) {
  return parse_germ("z1^" + std::to_string(a) + " + z2^" + std::to_string(b), 2);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Starts shared by the flow criteria and the step-halving check.
struct FlowStarts {
  MixedGerm germ = parse_germ("z1^2 + z2^3", 2);
  double eta = 1e-3 * germ.scale(kEps);
  std::vector<RealVector> monodromy;
  std::vector<RealVector> transport;
  std::vector<RealVector> radial;

  FlowStarts() {
    const FiberSample fib = sample_fiber(germ, 0.7, kEps, 100, 6);
    monodromy.assign(fib.points.begin(), fib.points.begin() + std::min<std::size_t>(50, fib.points.size()));
    const SphereSequence seq(4, 7);
    for (std::uint64_t i = 0; transport.size() < 100; ++i) {
      const RealVector x = kEps * seq.unit(i);
      if (std::abs(germ.value(x)) >= eta) transport.push_back(x);
    }
    for (int k = 0; k < 4; ++k) {
      const FiberSample f = sample_fiber(germ, k * kPi / 2, kEps, 5, 8 + static_cast<std::uint64_t>(k));
      radial.insert(radial.end(), f.points.begin(), f.points.end());
    }
  }
};

const FlowStarts& flow_starts() {
  static const FlowStarts s;
  return s;
}

Outcome genus_law() {
  Outcome o;
  double worst_time = 0.0;
  std::size_t max_seeds = 0;
  for (unsigned q = 2; q <= 5; ++q) {
    for (double theta : {0.0, kPi / 2}) {
      const auto t0 = std::chrono::steady_clock::now();
      MorseOptions opt;
      opt.max_seeds = 100'000;
      const long want = 4 - 2 * static_cast<long>(q);
      std::string chis;
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const MorseInventory inv = link_surface_euler(brieskorn(2, q), theta, kEps, seed, opt);
        max_seeds = std::max(max_seeds, inv.seeds_used);
        chis += std::to_string(inv.euler) + (seed < 5 ? "," : "");
        if (inv.euler != want) o.pass = false;
      }
      const double dt = seconds_since(t0);
      worst_time = std::max(worst_time, dt);
      if (dt > 300.0) o.pass = false;
      o.detail += fmt("q=%u theta=%.4g chi={%s} want %ld; ", q, theta, chis.c_str(), want);
    }
  }
  o.detail += fmt("max seeds %zu, slowest case %.2fs", max_seeds, worst_time);
  return o;
}

Outcome double_of_fiber() {
  Outcome o;
  const std::pair<unsigned, unsigned> cases[] = {{2, 2}, {2, 3}, {2, 4}, {2, 5}, {3, 4}, {3, 5}};
  for (const auto& [a, b] : cases) {
    const DoubleFiberReport r = double_fiber_consistency(brieskorn(a, b), 0.0, kEps, 1);
    if (!r.pass) o.pass = false;
    o.detail += fmt("(%u,%u) chi=%ld 2(1-mu)=%ld%s; ", a, b, r.chi, r.expected_chi, r.pass ? "" : " MISMATCH");
  }
  return o;
}

Outcome mu_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_int_distribution<std::uint64_t> ex(2, 40);
  int agree = 0, tried = 0;
  while (tried < 50) {
    std::vector<std::uint64_t> a(static_cast<std::size_t>(len(rng)));
    long double prod = 1.0L;
    for (auto& e : a) {
      e = ex(rng);
      prod *= static_cast<long double>(e - 1);
    }
    if (prod > 1e6L) continue;
    ++tried;
    agree += closed_form_mu(a).mu == staircase_mu(a).mu;
  }
  return {agree == 50, fmt("%d/50 tuples agree", agree)};
}

// Criteria 4 and 5 share the search runs.
struct SearchRuns {
  std::vector<std::pair<std::string, TransversalityReport>> runs;
  bool deterministic = false;
  double linear_min = 0.0;

  SearchRuns() {
    RegularityOptions opt;
    opt.polish_runs = 100;
    for (const char* text : {"z1^2 + z2^3", "z1^2 + z2^3 + z3^5", "z1^2*conj(z2) + z2^2*conj(z1)", "z1*conj(z2)"}) {
      const MixedGerm g = parse_germ(text, infer_n_vars(text));
      for (double eps : {0.1, 0.3, 0.5})
        runs.emplace_back(fmt("%s @%.1f", text, eps), d_regularity_search(g, eps, 100'000, 1, opt));
    }
    const TransversalityReport again = d_regularity_search(parse_germ("z1^2 + z2^3", 2), 0.1, 100'000, 1, opt);
    deterministic = again.min_defect == runs[0].second.min_defect && again.witness == runs[0].second.witness;
    linear_min = d_regularity_search(parse_germ("z1", 2), 1.0, 10'000, 1, opt).min_defect;
  }
};

const SearchRuns& search_runs() {
  static const SearchRuns s;
  return s;
}

Outcome d_regularity() {
  const SearchRuns& s = search_runs();
  Outcome o;
  for (const auto& [name, r] : s.runs) {
    if (!r.verdict) o.pass = false;
    o.detail += fmt("%s min %.4g; ", name.c_str(), r.min_defect);
  }
  if (!s.deterministic) o.pass = false;
  if (!(std::abs(s.linear_min - 1.0) <= 1e-10)) o.pass = false;
  o.detail += fmt("deterministic %s; f=z1 min %.17g", s.deterministic ? "yes" : "NO", s.linear_min);
  return o;
}

Outcome milnor_pi4() {
  const SearchRuns& s = search_runs();
  Outcome o;
  std::size_t violations = 0, checked = 0;
  for (const auto& [name, r] : s.runs)
    if (r.lambda_checked) {
      ++checked;
      violations += r.lambda_violations;
    }
  std::vector<double> radii;
  for (int k = 0; k <= 20; ++k) radii.push_back(std::ldexp(1.0, -k));
  const MixedGerm g = parse_germ("z1^2 + z2^2", 2);
  double worst = 0.0;
  std::mt19937_64 rng(5);
  for (int d = 0; d < 8; ++d) {
    RealVector dir = RealVector::Zero(4);
    std::normal_distribution<double> n(0.0, 1.0);
    dir[0] = n(rng);
    dir[2] = n(rng);
    for (const auto& e : radial_lambda_scan(g, dir, radii).entries)
      worst = std::max(worst, e.on_axis ? 1.0 : std::abs(e.diagnostic.arg_lambda_prime));
  }
  o.pass = violations == 0 && checked == 6 && worst <= 1e-9;
  o.detail = fmt("%zu violations over %zu holomorphic runs; real-direction max |arg lambda'| %.3g", violations, checked, worst);
  return o;
}

Outcome monodromy() {
  Outcome o;
  const MixedGerm lin = parse_germ("z1", 2);
  const RealVector x0 = [] {
    RealVector v(4);
    v << 0.8, 0.0, 0.3, 0.0;
    return v;
  }();
  const MonodromyResult one = monodromy_return(lin, x0, 1.0);
  const MonodromyResult half = monodromy_return(lin, x0, 0.5);
  const double ret = (one.endpoint - x0).norm();
  const bool flip = half.start_side_positive && !half.end_side_positive;
  if (!(ret < 1e-7) || !flip) o.pass = false;
  const FlowStarts& fs = flow_starts();
  double nd = 0.0, md = 0.0;
  int wound = 0;
  for (const RealVector& x : fs.monodromy) {
    const MonodromyResult r = monodromy_return(fs.germ, x, 1.0);
    nd = std::max(nd, r.norm_drift);
    md = std::max(md, r.modulus_drift);
    wound += r.winding == 1 && r.end_side_positive;
  }
  if (fs.monodromy.size() != 50 || !(nd < 1e-6 * kEps) || !(md < 1e-6) || wound != 50) o.pass = false;
  o.detail = fmt("f=z1 return %.3g, half-turn side flip %s; %zu starts: norm drift %.3g, |f| drift %.3g, winding 1 on %d",
                 ret, flip ? "yes" : "NO", fs.monodromy.size(), nd, md, wound);
  return o;
}

Outcome equivalence() {
  const FlowStarts& fs = flow_starts();
  const auto recs = equivalence_transport(fs.germ, kEps, fs.eta, fs.transport);
  int reached = 0, excursions = 0;
  double drift = 0.0, max_norm = 0.0;
  std::string first_failure;
  for (const auto& r : recs) {
    reached += r.reached_tube;
    excursions += r.excursion || r.max_norm > kEps * (1.0 + 1e-12);
    drift = std::max(drift, r.theta_drift);
    max_norm = std::max(max_norm, r.max_norm);
    if (!r.failure.empty() && first_failure.empty()) first_failure = r.failure;
  }
  const bool pass = reached == 100 && drift < 1e-6 && excursions == 0;
  return {pass, fmt("%d/100 reached |f|=eta=%.3g, max theta drift %.3g, max |x| %.17g, excursions %d%s%s", reached,
                    fs.eta, drift, max_norm, excursions, first_failure.empty() ? "" : ", first failure: ",
                    first_failure.c_str())};
}

Outcome conical() {
  const FlowStarts& fs = flow_starts();
  double drift = 0.0, residual = 0.0;
  for (const RealVector& x : fs.radial) {
    const FlowTrace tr = integrate(fs.germ, FlowKind::Radial, x, 0.0, 0.01 - kEps * kEps);
    drift = std::max(drift, tr.theta_drift);
    residual = std::max(residual, tr.sq_norm_residual);
  }
  const bool pass = fs.radial.size() == 20 && drift < 1e-8 && residual < 1e-8;
  return {pass, fmt("%zu starts over 4 angles: theta drift %.3g, |x|^2 - t residual %.3g", fs.radial.size(), drift, residual)};
}

Outcome step_halving() {
  const FlowStarts& fs = flow_starts();
  struct Family {
    const char* name;
    FlowKind kind;
    const std::vector<RealVector>* starts;
  };
  const Family families[] = {{"monodromy", FlowKind::Monodromy, &fs.monodromy},
                             {"transport", FlowKind::TubeEquivalence, &fs.transport},
                             {"radial", FlowKind::Radial, &fs.radial}};
  Outcome o;
  for (const Family& fam : families) {
    int monotone = 0, total = 0;
    double worst_ratio = 0.0;
    for (const RealVector& x0 : *fam.starts) {
      double t1 = 0.0;
      FlowOptions opt;
      switch (fam.kind) {
        case FlowKind::Monodromy: t1 = 2.0 * kPi; break;
        case FlowKind::Radial: t1 = 0.01 - kEps * kEps; break;
        case FlowKind::TubeEquivalence:
          t1 = std::log(fs.eta / std::abs(fs.germ.value(x0)));
          opt.ball_radius = kEps;
          break;
      }
      opt.step.fixed_step = true;
      std::vector<RealVector> ends;
      ++total;
      try {
        for (int k = 0; k < 4; ++k) {
          opt.step.initial_step = std::abs(t1) / 16.0 / (1 << k);
          ends.push_back(integrate(fs.germ, fam.kind, x0, 0.0, t1, opt).back().x);
        }
      } catch (const Error&) {
        continue;
      }
      const double d0 = (ends[0] - ends[1]).norm(), d1 = (ends[1] - ends[2]).norm(), d2 = (ends[2] - ends[3]).norm();
      if (d0 > d1 && d1 > d2) ++monotone;
      worst_ratio = std::max({worst_ratio, d1 / d0, d2 / d1});
    }
    if (monotone != total) o.pass = false;
    o.detail += fmt("%s %d/%d monotone (max ratio %.3g); ", fam.name, monotone, total, worst_ratio);
  }
  o.detail += "steps span/16, /32, /64, /128";
  return o;
}

Outcome spherefication_identity() {
  Outcome o;
  std::mt19937_64 rng(10);
  for (const char* text : {"z1^2 + z2^3", "z1^2 + z2^3 + z3^5", "z1^2*conj(z2) + z2^2*conj(z1)", "z1*conj(z2)", "z1"}) {
    const std::size_t n = std::max<std::size_t>(2, infer_n_vars(text));
    const MixedGerm g = parse_germ(text, n);
    std::uniform_real_distribution<double> rad(1e-3, 1.0);
    double sphere = 0.0, incidence = 0.0;
    int points = 0;
    while (points < 10'000) {
      const RealVector x = rad(rng) * random_unit_vector(rng, 2 * n);
      if (classify(g, x).is_axis()) continue;
      ++points;
      sphere = std::max(sphere, std::abs(std::abs(spherefication(g, x)) - x.norm()) / x.norm());
      incidence = std::max(incidence, std::abs(blowup_residual(g, blowup_lift(g, x))) / std::abs(g.value(x)));
    }
    if (!(sphere < 1e-14) || !(incidence < 1e-13)) o.pass = false;
    o.detail += fmt("%s: %.2g, %.2g; ", text, sphere, incidence);
  }
  o.detail += "(relative sphere error, relative incidence residual over 1e4 points each)";
  return o;
}

Outcome strong_milnor() {
  Outcome o;
  for (const char* text : {"z1*conj(z2)", "z1^2*conj(z2) + z2^2*conj(z1)"}) {
    const MixedGerm g = parse_germ(text, 2);
    const ScanReport sm = strong_milnor_check(g, kEps, 10'000, 1);
    const IsolationReport iso = critical_value_isolation_scan(g, kEps, 10'000, 1e-6 * g.scale(kEps), 1);
    if (!sm.verdict || !iso.scan.verdict) o.pass = false;
    o.detail += fmt("%s: strong Milnor min %.4g, isolation min %.4g (relative %.4g); ", text, sm.min_value,
                    iso.scan.min_value, iso.min_relative_margin);
  }
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"genus law chi = 4 - 2q", genus_law},
      {"double of fiber chi = 2(1 - mu)", double_of_fiber},
      {"closed-form mu equals staircase mu", mu_oracle},
      {"d-regularity evidence", d_regularity},
      {"Milnor pi/4 condition", milnor_pi4},
      {"monodromy", monodromy},
      {"fibration equivalence transport", equivalence},
      {"conical structure", conical},
      {"step-halving convergence", step_halving},
      {"spherefication identity", spherefication_identity},
      {"strong Milnor and isolated critical value", strong_milnor},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s: %s [%.1fs] %s\n", index, o.pass ? "PASS" : "FAIL", name, seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
