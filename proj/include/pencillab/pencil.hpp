#pragma once

// The canonical pencil X_theta = {h_theta = 0}, its half-branches E_theta
// (f on the open ray at angle theta), the axis V = {f = 0}, and the maps
// Phi = f/|f|, Psi = (Re f : Im f) and the spherefication x -> |x| f/|f|.
//
// Sign convention: h_theta(x) = Im(exp(-i theta) f(x)). Then h_0 = Im f and
// h_{pi/2} = -Re f. Only zero sets and the sign of Re(exp(-i theta) f), which
// separates E_theta (+) from E_{theta+pi} (-), carry meaning.

#include "pencillab/differential.hpp"
#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/projection.hpp"
#include "pencillab/sampling.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace pencillab {

inline double h_theta(const MixedGerm& germ, double theta, const RealVector& x) {
  return (std::polar(1.0, -theta) * germ.value(x)).imag();
}

/// Re(exp(-i theta) f): positive on E_theta, negative on E_{theta+pi}.
inline double pencil_side(const MixedGerm& germ, double theta, const RealVector& x) {
  return (std::polar(1.0, -theta) * germ.value(x)).real();
}

struct PencilClassification {
  enum class Kind { Axis, Ray };
  Kind kind = Kind::Axis;
  double theta = 0.0;    // in [0, 2pi), Ray only
  double modulus = 0.0;  // |f(x)|, Ray only

  bool is_axis() const { return kind == Kind::Axis; }
};

inline PencilClassification classify(const MixedGerm& germ, const RealVector& x, double axis_floor) {
  const Complex v = germ.value(x);
  const double m = std::abs(v);
  if (!(m > axis_floor)) return {};
  return {PencilClassification::Kind::Ray, wrap_angle(std::atan2(v.imag(), v.real())), m};
}

inline PencilClassification classify(const MixedGerm& germ, const RealVector& x) {
  return classify(germ, x, default_axis_floor(germ, x.norm()));
}

/// Point of RP^1 as a unit vector (t1, t2) with the first nonzero coordinate positive.
struct ProjectivePair {
  double t1 = 1.0;
  double t2 = 0.0;

  static ProjectivePair normalized(double t1, double t2) {
    const double r = std::hypot(t1, t2);
    require(r > 0.0, "projective pair (0:0) is undefined");
    t1 /= r;
    t2 /= r;
    if (t1 < 0.0 || (t1 == 0.0 && t2 < 0.0)) {
      t1 = -t1;
      t2 = -t2;
    }
    return {t1 + 0.0, t2 + 0.0};  // +0.0 folds -0.0
  }

  bool operator==(const ProjectivePair&) const = default;
};

/// Image of a unit complex number under the double cover S^1 -> RP^1.
inline ProjectivePair projectivize(Complex unit) { return ProjectivePair::normalized(unit.real(), unit.imag()); }

namespace detail {
inline Complex ray_value(const MixedGerm& germ, const RealVector& x, std::optional<double> axis_floor) {
  const Complex v = germ.value(x);
  const double floor = axis_floor.value_or(default_axis_floor(germ, x.norm()));
  if (!(std::abs(v) > floor)) throw Error(ErrorKind::AxisProximity, "point lies on the axis V");
  return v;
}
}  // namespace detail

/// Phi(x) = f(x)/|f(x)|.
inline Complex phase(const MixedGerm& germ, const RealVector& x, std::optional<double> axis_floor = std::nullopt) {
  const Complex v = detail::ray_value(germ, x, axis_floor);
  return v / std::abs(v);
}

/// Psi(x) = (Re f(x) : Im f(x)).
inline ProjectivePair projective_phase(const MixedGerm& germ, const RealVector& x,
                                       std::optional<double> axis_floor = std::nullopt) {
  return projectivize(phase(germ, x, axis_floor));
}

/// |x| f(x)/|f(x)| as a point of C = R^2.
inline Complex spherefication(const MixedGerm& germ, const RealVector& x,
                              std::optional<double> axis_floor = std::nullopt) {
  return x.norm() * phase(germ, x, axis_floor);
}

struct BlowupPoint {
  RealVector x;
  ProjectivePair t;
};

/// Re(f(x)) t2 - Im(f(x)) t1; zero exactly on the incidence variety.
inline double blowup_residual(const MixedGerm& germ, const RealVector& x, const ProjectivePair& t) {
  const Complex v = germ.value(x);
  return v.real() * t.t2 - v.imag() * t.t1;
}

inline double blowup_residual(const MixedGerm& germ, const BlowupPoint& p) { return blowup_residual(germ, p.x, p.t); }

/// Lifts x (off V) into the blow-up: (x, Psi(x)).
inline BlowupPoint blowup_lift(const MixedGerm& germ, const RealVector& x) { return {x, projective_phase(germ, x)}; }

// ---------------------------------------------------------------------------
// Fiber sampling: points of E_theta intersected with the sphere S_radius.

struct FiberOptions {
  double tol_fiber = 1e-10;  // |h_theta| < tol_fiber * germ.scale(radius)
  double tol_radius = 1e-12; // relative
  int max_iterations = 80;
};

struct FiberSample {
  std::vector<RealVector> points;
  std::size_t requested = 0;
  std::size_t dropped = 0;
};

namespace detail {

/// Newton projection of `seed` onto E_theta intersected with S_radius.
inline std::optional<RealVector> project_to_fiber(const MixedGerm& germ, double theta, double radius,
                                                  const RealVector& seed, double axis_floor,
                                                  const FiberOptions& opt) {
  const ConstraintFn constraints = [&](const RealVector& x) -> std::optional<ConstraintEval> {
    const WirtingerJet jet = germ.jet(to_complex(x));
    const double rho = std::abs(jet.value);
    if (!(rho > axis_floor)) return std::nullopt;
    RealVector ga, gb;
    real_gradients(jet, ga, gb);
    const double a = jet.value.real();
    const double b = jet.value.imag();
    ConstraintEval e{RealVector(2), RealMatrix(2, x.size())};
    e.residual[0] = wrap_signed(std::atan2(b, a) - theta);
    e.residual[1] = (x.squaredNorm() - radius * radius) / (2.0 * radius);
    e.jacobian.row(0) = ((a * gb - b * ga) / (rho * rho)).transpose();
    e.jacobian.row(1) = (x / radius).transpose();
    return e;
  };
  ProjectionOptions popt;
  popt.max_iterations = opt.max_iterations;
  popt.tolerance = 1e-14;
  popt.max_step = 0.25 * radius;
  auto x = project_onto(constraints, seed, popt);
  if (!x) return std::nullopt;
  *x *= radius / x->norm();
  const double scale = germ.scale(radius);
  if (std::abs(h_theta(germ, theta, *x)) >= opt.tol_fiber * scale) return std::nullopt;
  if (!(pencil_side(germ, theta, *x) > axis_floor)) return std::nullopt;
  if (std::abs(x->norm() - radius) > opt.tol_radius * radius) return std::nullopt;
  return x;
}

}  // namespace detail

/// Samples E_theta on the sphere of the given radius by Newton projection of
/// quasi-random sphere seeds. Failed projections are dropped and counted;
/// more than half failing raises ProjectionFailure.
inline FiberSample sample_fiber(const MixedGerm& germ, double theta, double radius, std::size_t count,
                                std::uint64_t seed, const FiberOptions& opt = {}) {
  require(radius > 0.0, "radius must be positive");
  FiberSample out;
  out.requested = count;
  if (count == 0) return out;
  const SphereSequence seq(2 * germ.n_vars(), seed);
  const double floor = default_axis_floor(germ, radius);
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<std::vector<RealVector>> found(chunks);
  parallel_chunks(chunks, [&](std::size_t c) {
    for (std::size_t i = c * kChunk; i < std::min(count, (c + 1) * kChunk); ++i) {
      if (auto x = detail::project_to_fiber(germ, theta, radius, radius * seq.unit(i), floor, opt))
        found[c].push_back(std::move(*x));
    }
  });
  for (auto& chunk : found)
    for (auto& x : chunk) out.points.push_back(std::move(x));
  out.dropped = count - out.points.size();
  if (2 * out.dropped > count)
    throw Error(ErrorKind::ProjectionFailure, std::to_string(out.dropped) + " of " + std::to_string(count) +
                                                  " fiber projections failed at theta=" + std::to_string(theta));
  return out;
}

// ---------------------------------------------------------------------------
// Accumulation of E_theta on a point of V.

struct AccumulationResult {
  double theta = 0.0;
  bool found = false;
  double distance = 0.0;
  RealVector point;
};

/// For every angle, Newton-solves f(x) = s exp(i theta) starting at the axis
/// point and reports the distance of the solution from it. When `target_modulus`
/// is not given, s = 0.1 * delta * |df(v_point)|.
inline std::vector<AccumulationResult> axis_accumulation_probe(const MixedGerm& germ, const RealVector& v_point,
                                                               const std::vector<double>& thetas, double delta,
                                                               std::optional<double> target_modulus = std::nullopt) {
  require(classify(germ, v_point, default_axis_floor(germ, std::max(v_point.norm(), delta))).is_axis(),
          "accumulation probe needs a point on the axis V");
  require(delta > 0.0, "delta must be positive");
  RealVector ga, gb;
  real_gradients(germ.jet(to_complex(v_point)), ga, gb);
  double s = target_modulus.value_or(0.1 * delta * std::max(ga.norm(), gb.norm()));
  if (!(s > 0.0)) s = 0.1 * germ.scale(delta);
  std::vector<AccumulationResult> out;
  for (double theta : thetas) {
    const Complex target = std::polar(s, theta);
    const ConstraintFn constraints = [&](const RealVector& x) -> std::optional<ConstraintEval> {
      const WirtingerJet jet = germ.jet(to_complex(x));
      ConstraintEval e{RealVector(2), RealMatrix(2, x.size())};
      RealVector a, b;
      real_gradients(jet, a, b);
      e.residual[0] = (jet.value.real() - target.real()) / s;
      e.residual[1] = (jet.value.imag() - target.imag()) / s;
      e.jacobian.row(0) = a.transpose() / s;
      e.jacobian.row(1) = b.transpose() / s;
      return e;
    };
    ProjectionOptions popt;
    popt.tolerance = 1e-10;
    popt.max_step = 0.5 * delta;
    AccumulationResult r;
    r.theta = theta;
    if (auto x = project_onto(constraints, v_point, popt)) {
      r.point = *x;
      r.distance = (*x - v_point).norm();
      r.found = r.distance < delta;
    } else {
      r.distance = std::numeric_limits<double>::infinity();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pencillab
