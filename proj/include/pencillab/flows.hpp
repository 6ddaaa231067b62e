#pragma once

// Vector fields adapted to the pencil, synthesized as minimum-norm solutions of
// linear constraints on the velocity, and their monitored integration.
//
//   Monodromy        <w, x> = 0, <w, grad theta> = 1, <w, grad log|f|> = 0
//                    (tangent to spheres and Milnor tubes, theta at unit rate).
//                    Near the locus where x and grad log f are complex-colinear
//                    the tube row is dropped; there |<w, grad log|f|>| < 1 keeps
//                    the flow away from V in finite time.
//   Radial           <v, grad theta> = 0, <v, 2x> = 1   (d|x|^2/dt = 1 on X_theta)
//   TubeEquivalence  <v, grad theta> = 0, <v, grad log|f|> = 1, <v, x> > 0
//
// All inner products are the real ones on R^{2n}.

#include "pencillab/differential.hpp"
#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/ode.hpp"
#include "pencillab/pencil.hpp"
#include "pencillab/projection.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pencillab {

enum class FlowKind { Monodromy, Radial, TubeEquivalence };

inline std::string_view to_string(FlowKind k) {
  switch (k) {
    case FlowKind::Monodromy: return "monodromy";
    case FlowKind::Radial: return "radial";
    case FlowKind::TubeEquivalence: return "tube-equivalence";
  }
  return "unknown";
}

struct FlowOptions {
  double cond_max = 1e8;
  // TubeEquivalence: lower bound on d log|x| / dt. The minimum-norm field v0
  // is shifted along the direction c that keeps the theta and log|f| rates
  // and has unit radial rate, by a C5 smoothing s of max(0, floor - rate(v0))
  // with s >= max(0, floor - rate); s vanishes once the rate exceeds
  // floor + radial_rate_smoothing. floor 0 disables the shift; a non-positive
  // radial rate is then an error.
  double radial_rate_floor = 0.05;
  double radial_rate_smoothing = 0.05;
  // Radial: cap on |d log|f| / d log|x|^2|, in units of the germ degree. The
  // minimum-norm field is not tangent to V, so trajectories of X_theta minus V
  // may cross the axis; beyond the cap the field is shifted along the
  // direction that keeps theta and |x|^2 rates and changes only log|f|.
  // Below cap - smoothing the field is exactly minimum-norm. 0 disables.
  double radial_modulus_cap = 2.0;
  double radial_modulus_smoothing = 1.0;
  double axis_floor_rel = 1e-12;
  double ball_radius = std::numeric_limits<double>::infinity();
  bool project = true;
  double monitor_tol = 1e-6;
  StepControl step{};
};

struct FieldSample {
  RealVector velocity;
  double condition = 0.0;
  bool fallback = false;           // Monodromy: tube constraint dropped
  bool radial_correction = false;  // minimum-norm field shifted (radial floor or modulus cap)
  double tube_rate = 0.0;          // <v, grad log|f|>
  double theta_rate = 0.0;         // <v, grad theta>
  double radial_rate = 0.0;        // <v, x> / |x|^2
};

namespace detail {

// C5 smooth version of max(0, d): zero below -w, identity above w, convex,
// never below max(0, d). Integral of the degree-9 smoothstep.
inline double smooth_excess(double d, double w) {
  if (d <= -w) return 0.0;
  if (d >= w) return d;
  const double u = (d + w) / (2.0 * w);
  const double u6 = u * u * u * u * u * u;
  return 2.0 * w * u6 * (21.0 + u * (-60.0 + u * (67.5 + u * (-35.0 + 7.0 * u))));
}

}  // namespace detail

inline FieldSample synthesize_field(const MixedGerm& germ, FlowKind kind, const RealVector& x,
                                    const FlowOptions& opt = {}) {
  const DifferentialSample s = differential_sample(germ, x, opt.axis_floor_rel * germ.scale(x.norm()));
  if (!(s.grad_theta.norm() * x.norm() > 1e-12))
    throw Error(ErrorKind::DegenerateGradient, "grad theta vanishes");
  const Eigen::Index d = x.size();
  FieldSample out;
  auto solve = [&](std::initializer_list<std::pair<RealVector, double>> rows) {
    RealMatrix a(static_cast<Eigen::Index>(rows.size()), d);
    RealVector b(static_cast<Eigen::Index>(rows.size()));
    Eigen::Index k = 0;
    for (const auto& [g, r] : rows) {
      a.row(k) = g.transpose();
      b[k++] = r;
    }
    return min_norm_solve(a, b, opt.cond_max);
  };

  switch (kind) {
    case FlowKind::Monodromy: {
      if (auto sol = solve({{x, 0.0}, {s.grad_theta, 1.0}, {s.grad_log_rho, 0.0}})) {
        out.velocity = sol->velocity;
        out.condition = sol->condition;
      } else if (auto fb = solve({{x, 0.0}, {s.grad_theta, 1.0}})) {
        out.velocity = fb->velocity;
        out.condition = fb->condition;
        out.fallback = true;
        const double drift = out.velocity.dot(s.grad_log_rho);
        if (!(std::abs(drift) < 1.0))
          throw Error(ErrorKind::CompletenessViolation, "|d log|f|/dt| = " + std::to_string(std::abs(drift)) + " >= 1");
      } else {
        throw Error(ErrorKind::GramSingular, "x and grad theta are dependent");
      }
      break;
    }
    case FlowKind::Radial: {
      auto sol = solve({{s.grad_theta, 0.0}, {2.0 * x, 1.0}});
      if (!sol) throw Error(ErrorKind::GramSingular, "grad theta is radial (pencil member tangent to the sphere)");
      out.velocity = sol->velocity;
      out.condition = sol->condition;
      if (opt.radial_modulus_cap > 0.0) {
        const double deg = static_cast<double>(germ.degree());
        const double cap = opt.radial_modulus_cap * deg;
        const double w = opt.radial_modulus_smoothing * deg;
        const double x2 = x.squaredNorm();
        const double rate = out.velocity.dot(s.grad_log_rho) * x2;  // d log|f| / d log|x|^2
        const double shift = detail::smooth_excess(rate - cap, w) - detail::smooth_excess(-rate - cap, w);
        if (shift != 0.0) {
          auto corr = solve({{s.grad_theta, 0.0}, {2.0 * x, 0.0}, {s.grad_log_rho, 1.0}});
          if (!corr) throw Error(ErrorKind::GramSingular, "modulus cap unavailable at a complex-colinear point");
          out.velocity -= (shift / x2) * corr->velocity;
          out.radial_correction = true;
        }
      }
      break;
    }
    case FlowKind::TubeEquivalence: {
      auto sol = solve({{s.grad_theta, 0.0}, {s.grad_log_rho, 1.0}});
      if (!sol) throw Error(ErrorKind::GramSingular, "grad theta and grad log|f| are dependent");
      out.velocity = sol->velocity;
      out.condition = sol->condition;
      const double x2 = x.squaredNorm();
      const double rate = out.velocity.dot(x) / x2;
      if (opt.radial_rate_floor > 0.0) {
        const double shift = detail::smooth_excess(opt.radial_rate_floor - rate, opt.radial_rate_smoothing);
        if (shift > 0.0) {
          auto corr = solve({{s.grad_theta, 0.0}, {s.grad_log_rho, 0.0}, {x / x2, 1.0}});
          if (!corr) throw Error(ErrorKind::RadialMonotonicity, "radial correction unavailable");
          out.velocity += shift * corr->velocity;
          out.radial_correction = true;
        }
      } else if (!(rate > 0.0)) {
        throw Error(ErrorKind::RadialMonotonicity, "<v, x> <= 0");
      }
      break;
    }
  }
  out.tube_rate = out.velocity.dot(s.grad_log_rho);
  out.theta_rate = out.velocity.dot(s.grad_theta);
  out.radial_rate = out.velocity.dot(x) / x.squaredNorm();
  return out;
}

// ---------------------------------------------------------------------------

struct TraceSample {
  double t = 0.0;
  RealVector x;
  double norm = 0.0;
  double modulus = 0.0;
  double theta = 0.0;  // unwrapped
};

struct FlowTrace {
  FlowKind kind = FlowKind::Monodromy;
  std::vector<TraceSample> samples;
  long accepted_steps = 0;
  long rejected_steps = 0;
  long fallback_steps = 0;
  long correction_steps = 0;
  double max_condition = 0.0;
  std::string termination = "completed";

  // Monitored invariants (max deviations over accepted steps).
  double norm_drift = 0.0;         // Monodromy: | |x| - |x0| |
  double modulus_drift = 0.0;      // Monodromy: | |f| - |f0| | / |f0| on non-fallback steps
  double theta_rate_error = 0.0;   // Monodromy: | theta - theta0 - (t - t0) |
  double theta_drift = 0.0;        // Radial / Tube: | theta - theta0 |
  double sq_norm_residual = 0.0;   // Radial: | |x|^2 - |x0|^2 - (t - t0) |
  double log_modulus_residual = 0.0;  // Tube: | log|f| - log|f0| - (t - t0) |
  double max_norm = 0.0;
  bool theta_monotone = true;      // Monodromy: strictly increasing in t
  bool norm_monotone = true;       // Tube: |x| strictly increasing in t

  const TraceSample& back() const { return samples.back(); }
};

namespace detail {

inline RealVector project_to_level(const MixedGerm& germ, const RealVector& x, double theta0, double floor) {
  const ConstraintFn c = [&](const RealVector& y) -> std::optional<ConstraintEval> {
    const WirtingerJet jet = germ.jet(to_complex(y));
    const double rho = std::abs(jet.value);
    if (!(rho > floor)) return std::nullopt;
    RealVector ga, gb;
    real_gradients(jet, ga, gb);
    ConstraintEval e{RealVector(1), RealMatrix(1, y.size())};
    e.residual[0] = wrap_signed(std::arg(jet.value) - theta0);
    e.jacobian.row(0) = ((jet.value.real() * gb - jet.value.imag() * ga) / (rho * rho)).transpose();
    return e;
  };
  ProjectionOptions popt;
  popt.max_iterations = 4;
  popt.tolerance = 1e-15;
  popt.require_convergence = false;
  auto y = project_onto(c, x, popt);
  return y ? *y : x;
}

inline RealVector project_to_torus(const MixedGerm& germ, const RealVector& x, double r0, double log_rho0,
                                   double floor) {
  const ConstraintFn c = [&](const RealVector& y) -> std::optional<ConstraintEval> {
    const WirtingerJet jet = germ.jet(to_complex(y));
    const double rho = std::abs(jet.value);
    if (!(rho > floor)) return std::nullopt;
    RealVector ga, gb;
    real_gradients(jet, ga, gb);
    ConstraintEval e{RealVector(2), RealMatrix(2, y.size())};
    e.residual[0] = (y.squaredNorm() - r0 * r0) / (2.0 * r0);
    e.residual[1] = std::log(rho) - log_rho0;
    e.jacobian.row(0) = (y / r0).transpose();
    e.jacobian.row(1) = ((jet.value.real() * ga + jet.value.imag() * gb) / (rho * rho)).transpose();
    return e;
  };
  ProjectionOptions popt;
  popt.max_iterations = 4;
  popt.tolerance = 1e-15;
  popt.require_convergence = false;
  auto y = project_onto(c, x, popt);
  return y ? *y : x;
}

}  // namespace detail

/// Integrates the chosen field from x0 over [t0, t1] with per-step invariant
/// monitoring and (optionally) projection back onto the exact invariant set:
/// sphere and Milnor tube for Monodromy, X_theta for Radial/TubeEquivalence.
inline FlowTrace integrate(const MixedGerm& germ, FlowKind kind, const RealVector& x0, double t0, double t1,
                           const FlowOptions& opt = {}) {
  FlowTrace tr;
  tr.kind = kind;
  const double floor0 = opt.axis_floor_rel * germ.scale(x0.norm());
  const Complex f0 = germ.value(x0);
  if (!(std::abs(f0) > floor0)) throw Error(ErrorKind::AxisProximity, "flow start lies on the axis V");
  require(x0.norm() <= opt.ball_radius * (1.0 + 1e-9), "flow start lies outside the working ball");
  const double r0 = x0.norm();
  const double rho0 = std::abs(f0);
  const double theta0 = std::arg(f0);
  tr.samples.push_back({t0, x0, r0, rho0, theta0});
  tr.max_norm = r0;

  const auto rhs = [&](double, const RealVector& x) -> RealVector {
    return synthesize_field(germ, kind, x, opt).velocity;
  };
  const auto accept = [&](double t, RealVector& x) -> bool {
    const FieldSample fs = synthesize_field(germ, kind, x, opt);
    tr.max_condition = std::max(tr.max_condition, fs.condition);
    if (fs.fallback) ++tr.fallback_steps;
    if (fs.radial_correction) ++tr.correction_steps;
    if (opt.project) {
      if (kind == FlowKind::Monodromy) {
        x = fs.fallback ? RealVector(x * (r0 / x.norm()))
                        : detail::project_to_torus(germ, x, r0, std::log(rho0), floor0);
      } else {
        x = detail::project_to_level(germ, x, theta0, floor0);
      }
    }
    const Complex f = germ.value(x);
    const double rho = std::abs(f);
    const double norm = x.norm();
    if (!(rho > opt.axis_floor_rel * germ.scale(std::max(norm, r0))))
      throw Error(ErrorKind::AxisApproach, "trajectory reached the axis V");
    if (norm > opt.ball_radius * (1.0 + 1e-12)) throw Error(ErrorKind::BallExit, "trajectory left the working ball");
    const TraceSample& prev = tr.samples.back();
    const double theta = prev.theta + wrap_signed(std::arg(f) - prev.theta);
    const double dt = t - t0;
    switch (kind) {
      case FlowKind::Monodromy:
        tr.norm_drift = std::max(tr.norm_drift, std::abs(norm - r0));
        if (!fs.fallback) tr.modulus_drift = std::max(tr.modulus_drift, std::abs(rho - rho0) / rho0);
        tr.theta_rate_error = std::max(tr.theta_rate_error, std::abs(theta - theta0 - dt));
        if ((t - prev.t) * (theta - prev.theta) <= 0.0) tr.theta_monotone = false;
        break;
      case FlowKind::Radial:
        tr.theta_drift = std::max(tr.theta_drift, std::abs(theta - theta0));
        tr.sq_norm_residual = std::max(tr.sq_norm_residual, std::abs(norm * norm - r0 * r0 - dt));
        break;
      case FlowKind::TubeEquivalence:
        tr.theta_drift = std::max(tr.theta_drift, std::abs(theta - theta0));
        tr.log_modulus_residual = std::max(tr.log_modulus_residual, std::abs(std::log(rho) - std::log(rho0) - dt));
        if ((t - prev.t) * (norm - prev.norm) <= 0.0) tr.norm_monotone = false;
        break;
    }
    tr.max_norm = std::max(tr.max_norm, norm);
    tr.samples.push_back({t, x, norm, rho, theta});
    return true;
  };
  try {
    const OdeStats stats = integrate_dopri5(rhs, t0, t1, x0, opt.step, accept);
    tr.accepted_steps = stats.accepted;
    tr.rejected_steps = stats.rejected;
  } catch (const Error& e) {
    tr.termination = std::string(to_string(e.kind()));
    throw;
  }
  return tr;
}

// ---------------------------------------------------------------------------

struct MonodromyResult {
  RealVector endpoint;
  double norm_drift = 0.0;      // absolute, max over the trajectory
  double modulus_drift = 0.0;   // relative, max over non-fallback steps
  double theta_advance = 0.0;   // unwrapped
  long winding = 0;             // round(theta_advance / 2pi)
  bool start_side_positive = true;
  bool end_side_positive = true;  // sign of Re(exp(-i theta0) f(endpoint))
  FlowTrace trace;
};

/// Flows the monodromy field for 2pi * revolutions (revolutions may be
/// fractional; 0.5 moves E_theta onto E_{theta+pi}).
inline MonodromyResult monodromy_return(const MixedGerm& germ, const RealVector& x0, double revolutions,
                                        const FlowOptions& opt = {}) {
  MonodromyResult r;
  r.trace = integrate(germ, FlowKind::Monodromy, x0, 0.0, 2.0 * std::numbers::pi * revolutions, opt);
  r.endpoint = r.trace.back().x;
  r.norm_drift = r.trace.norm_drift;
  r.modulus_drift = r.trace.modulus_drift;
  r.theta_advance = r.trace.back().theta - r.trace.samples.front().theta;
  r.winding = std::lround(r.theta_advance / (2.0 * std::numbers::pi));
  const double theta0 = r.trace.samples.front().theta;
  r.start_side_positive = pencil_side(germ, theta0, x0) > 0.0;
  r.end_side_positive = pencil_side(germ, theta0, r.endpoint) > 0.0;
  return r;
}

struct TransportRecord {
  RealVector start;
  RealVector terminal;
  bool reached_tube = false;
  double theta_drift = 0.0;
  double max_norm = 0.0;
  double terminal_modulus = 0.0;
  bool excursion = false;  // |x| > eps at some step
  long correction_steps = 0;
  std::string failure;     // empty on success
};

/// Flows each sphere point backward along TubeEquivalence until |f| = eta.
inline std::vector<TransportRecord> equivalence_transport(const MixedGerm& germ, double eps, double eta,
                                                          const std::vector<RealVector>& starts,
                                                          FlowOptions opt = {}) {
  require(eps > 0.0 && eta > 0.0, "eps and eta must be positive");
  opt.ball_radius = eps;
  for (const RealVector& x0 : starts) {
    require(std::abs(x0.norm() - eps) <= 1e-9 * eps, "transport start must lie on the sphere S_eps");
    require(std::abs(germ.value(x0)) >= eta, "transport start must satisfy |f| >= eta");
  }
  std::vector<TransportRecord> out(starts.size());
  parallel_chunks(starts.size(), [&](std::size_t k) {
    const RealVector& x0 = starts[k];
    TransportRecord& rec = out[k];
    rec.start = x0;
    const double m0 = std::abs(germ.value(x0));
    try {
      const FlowTrace tr = integrate(germ, FlowKind::TubeEquivalence, x0, 0.0, std::log(eta / m0), opt);
      rec.terminal = tr.back().x;
      rec.theta_drift = tr.theta_drift;
      rec.max_norm = tr.max_norm;
      rec.correction_steps = tr.correction_steps;
      rec.terminal_modulus = tr.back().modulus;
      rec.reached_tube = std::abs(rec.terminal_modulus - eta) <= 1e-6 * eta;
      if (!rec.reached_tube) rec.failure = "terminal point off the tube";
    } catch (const Error& e) {
      rec.failure = e.what();
      rec.excursion = e.kind() == ErrorKind::BallExit;
    }
  });
  return out;
}

}  // namespace pencillab
