#pragma once

// Transversality evidence for the pencil on metric spheres (d-regularity),
// Milnor's pi/4 condition through the lambda' number, and the submersion
// checks of the real (mixed) setting.
//
// All verdicts are numerical evidence from sampling, never certificates.

#include "pencillab/differential.hpp"
#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/pencil.hpp"
#include "pencillab/projection.hpp"
#include "pencillab/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace pencillab {

struct RegularityOptions {
  double newton_tolerance = 1e-10;
  double pass_threshold = 1e-9;          // 10x the Newton tolerance
  double colinearity_tol = 0.01;
  double pi4_margin = 0.05;              // rad
  double f_floor_rel = 1e-6;             // axis tube |f| <= f_floor_rel * scale is excluded
  double degenerate_gradient_tol = 1e-12;  // on |x| * |grad theta|
  std::size_t polish_runs = 100;
  std::size_t chunk = 4096;
};

// ---------------------------------------------------------------------------
// Transversality defect

/// |P(g)| / |g| where P removes the component along the metric-sphere normal
/// Q x. 0 means the pencil member is tangent to the sphere at x, 1 means its
/// normal g = grad theta is orthogonal to Q x.
inline double defect_from_gradient(const RealVector& grad_theta, const RealVector& x, const RealMatrix& q) {
  const RealVector normal = (q * x).normalized();
  const double gn = grad_theta.norm();
  const RealVector g = grad_theta / gn;
  const RealVector tangential = g - g.dot(normal) * normal;
  return std::min(1.0, tangential.norm());
}

inline double transversality_defect(const MixedGerm& germ, const RealVector& x, const RealMatrix& q,
                                    std::optional<double> axis_floor = std::nullopt,
                                    double degenerate_gradient_tol = RegularityOptions{}.degenerate_gradient_tol) {
  const DifferentialSample s = differential_sample(germ, x, axis_floor);
  if (!(s.grad_theta.norm() * x.norm() > degenerate_gradient_tol))
    throw Error(ErrorKind::DegenerateGradient, "grad theta vanishes (near-critical point)");
  return defect_from_gradient(s.grad_theta, x, q);
}

inline double transversality_defect(const MixedGerm& germ, const RealVector& x) {
  return transversality_defect(germ, x, RealMatrix::Identity(x.size(), x.size()));
}

// ---------------------------------------------------------------------------
// lambda' diagnostic (holomorphic germs)

struct LambdaDiagnostic {
  double colinearity = 1.0;  // 1 - |<grad log f, x>| / (|grad log f| |x|); 0 = complex-colinear
  Complex lambda_prime;      // <grad f(x), conj(f(x)) x>
  double arg_lambda_prime = 0.0;

  /// False only where x and grad log f are (nearly) colinear and |arg lambda'|
  /// is at or beyond pi/4 - margin.
  bool milnor_condition(double colinearity_tol, double margin) const {
    return !(colinearity < colinearity_tol && std::abs(arg_lambda_prime) >= std::numbers::pi / 4.0 - margin);
  }
};

inline LambdaDiagnostic lambda_diagnostic(const MixedGerm& germ, const RealVector& x,
                                          std::optional<double> axis_floor = std::nullopt) {
  require(germ.is_holomorphic(), "lambda diagnostic needs a holomorphic germ");
  const ComplexVector z = to_complex(x);
  const WirtingerJet jet = germ.jet(z);
  const double floor = axis_floor.value_or(default_axis_floor(germ, x.norm()));
  if (!(std::abs(jet.value) > floor)) throw Error(ErrorKind::AxisProximity, "lambda diagnostic on the axis V");
  const ComplexVector grad = jet.d_z.conjugate();
  const ComplexVector grad_log = grad / std::conj(jet.value);
  LambdaDiagnostic d;
  const double denom = grad_log.norm() * z.norm();
  d.colinearity = denom > 0.0 ? std::max(0.0, 1.0 - std::abs(hermitian(grad_log, z)) / denom) : 1.0;
  d.lambda_prime = hermitian(grad, std::conj(jet.value) * z);
  d.arg_lambda_prime = std::arg(d.lambda_prime);
  return d;
}

struct RadialLambdaEntry {
  double radius = 0.0;
  bool on_axis = false;  // f(radius * direction) within the axis floor
  LambdaDiagnostic diagnostic;
};

struct RadialLambdaScan {
  std::vector<RadialLambdaEntry> entries;
  double tail_max_abs_arg = 0.0;  // over colinear-flagged radii in the second half of the scan
  std::size_t colinear_flagged = 0;
  bool tail_trend_ok = true;      // |arg| of flagged tail entries never increases by more than 1e-12
};

/// lambda' along the ray t * direction for each (decreasing) radius t.
inline RadialLambdaScan radial_lambda_scan(const MixedGerm& germ, const RealVector& direction,
                                           const std::vector<double>& radii,
                                           const RegularityOptions& opt = {}) {
  require(germ.is_holomorphic(), "radial lambda scan needs a holomorphic germ");
  require(direction.norm() > 0.0, "direction must be nonzero");
  const RealVector u = direction.normalized();
  RadialLambdaScan scan;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < radii.size(); ++k) {
    RadialLambdaEntry e;
    e.radius = radii[k];
    try {
      e.diagnostic = lambda_diagnostic(germ, radii[k] * u);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::AxisProximity) throw;
      e.on_axis = true;
    }
    if (!e.on_axis && e.diagnostic.colinearity < opt.colinearity_tol) {
      ++scan.colinear_flagged;
      const double a = std::abs(e.diagnostic.arg_lambda_prime);
      if (2 * k >= radii.size()) {
        scan.tail_max_abs_arg = std::max(scan.tail_max_abs_arg, a);
        if (a > previous + 1e-12) scan.tail_trend_ok = false;
        previous = a;
      }
    }
    scan.entries.push_back(e);
  }
  return scan;
}

// ---------------------------------------------------------------------------
// d-regularity search

struct TransversalityReport {
  double radius = 0.0;
  RealMatrix metric;
  double min_defect = 1.0;
  RealVector witness;
  std::size_t budget = 0;
  std::size_t samples = 0;  // usable (off the axis tube, nondegenerate)
  std::size_t excluded_axis = 0;
  std::size_t degenerate = 0;
  std::size_t polish_runs = 0;
  std::array<std::size_t, 32> histogram{};
  bool inconclusive = false;
  bool verdict = false;
  // Milnor pi/4 condition over the same samples (holomorphic germs only).
  bool lambda_checked = false;
  std::size_t lambda_violations = 0;
  double min_colinearity = 1.0;
  double max_abs_arg_when_colinear = 0.0;
};

namespace detail {

struct DefectProbe {
  const MixedGerm& germ;
  const RealMatrix& q;
  double floor;
  double degenerate_tol;

  // NaN on the axis tube, -1 for degenerate gradients, else the defect.
  double operator()(const RealVector& x) const {
    try {
      return transversality_defect(germ, x, q, floor, degenerate_tol);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DegenerateGradient) return -1.0;
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
};

inline RealVector to_metric_sphere(const RealVector& y, const RealMatrix& q, double radius) {
  return radius * y / std::sqrt(y.dot(q * y));
}

/// Compass search for a local minimum of the defect on the metric sphere.
inline std::pair<RealVector, double> polish_defect(const DefectProbe& probe, RealVector x, double value, double radius) {
  double step = 0.05 * radius;
  int evaluations = 0;
  while (step > 1e-10 * radius && evaluations < 4000) {
    RealMatrix normal(x.size(), 1);
    normal.col(0) = probe.q * x;
    const RealMatrix tangent = orthogonal_complement(normal);
    bool improved = false;
    for (Eigen::Index k = 0; k < tangent.cols() && !improved; ++k) {
      for (double sign : {1.0, -1.0}) {
        const RealVector y = to_metric_sphere(x + sign * step * tangent.col(k), probe.q, radius);
        const double v = probe(y);
        ++evaluations;
        if (v >= 0.0 && v < value) {
          x = y;
          value = v;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {x, value};
}

}  // namespace detail

/// Quasi-random sampling of the metric sphere {x^T Q x = radius^2} followed by
/// local polishing from the worst samples. Deterministic given the seed.
inline TransversalityReport d_regularity_search(const MixedGerm& germ, double radius, const RealMatrix& q,
                                                std::size_t budget, std::uint64_t seed,
                                                const RegularityOptions& opt = {}) {
  require(radius > 0.0, "radius must be positive");
  const std::size_t dim = 2 * germ.n_vars();
  require(q.rows() == static_cast<Eigen::Index>(dim) && q.cols() == static_cast<Eigen::Index>(dim),
          "metric must be a 2n x 2n matrix");
  require(q.isApprox(q.transpose()) && Eigen::LLT<RealMatrix>(q).info() == Eigen::Success,
          "metric must be symmetric positive definite");

  TransversalityReport rep;
  rep.radius = radius;
  rep.metric = q;
  rep.budget = budget;
  rep.lambda_checked = germ.is_holomorphic();
  const double floor = opt.f_floor_rel * germ.scale(radius);
  const detail::DefectProbe probe{germ, q, floor, opt.degenerate_gradient_tol};
  const SphereSequence seq(dim, seed);

  struct Scored {
    double value;
    std::uint64_t index;
  };
  struct Chunk {
    std::vector<Scored> worst;  // k lowest, sorted
    std::size_t usable = 0, excluded = 0, degenerate = 0;
    std::array<std::size_t, 32> histogram{};
    std::size_t lambda_violations = 0;
    double min_colinearity = 1.0;
    double max_arg = 0.0;
  };
  const std::size_t keep = std::max<std::size_t>(opt.polish_runs, 1);
  const std::size_t chunks = (budget + opt.chunk - 1) / opt.chunk;
  std::vector<Chunk> parts(chunks);
  parallel_chunks(chunks, [&](std::size_t c) {
    Chunk& part = parts[c];
    for (std::size_t i = c * opt.chunk; i < std::min(budget, (c + 1) * opt.chunk); ++i) {
      const RealVector x = seq.on_metric_sphere(i, q, radius);
      const double v = probe(x);
      if (std::isnan(v)) {
        ++part.excluded;
        continue;
      }
      if (v < 0.0) {
        ++part.degenerate;
        continue;
      }
      ++part.usable;
      part.histogram[std::min<std::size_t>(31, static_cast<std::size_t>(v * 32.0))]++;
      auto pos = std::upper_bound(part.worst.begin(), part.worst.end(), v,
                                  [](double val, const Scored& s) { return val < s.value; });
      if (part.worst.size() < keep || pos != part.worst.end()) {
        part.worst.insert(pos, Scored{v, i});
        if (part.worst.size() > keep) part.worst.pop_back();
      }
      if (rep.lambda_checked) {
        const LambdaDiagnostic d = lambda_diagnostic(germ, x, floor);
        part.min_colinearity = std::min(part.min_colinearity, d.colinearity);
        if (d.colinearity < opt.colinearity_tol)
          part.max_arg = std::max(part.max_arg, std::abs(d.arg_lambda_prime));
        if (!d.milnor_condition(opt.colinearity_tol, opt.pi4_margin)) ++part.lambda_violations;
      }
    }
  });

  std::vector<Scored> worst;
  for (const Chunk& part : parts) {
    rep.samples += part.usable;
    rep.excluded_axis += part.excluded;
    rep.degenerate += part.degenerate;
    for (std::size_t b = 0; b < 32; ++b) rep.histogram[b] += part.histogram[b];
    rep.lambda_violations += part.lambda_violations;
    rep.min_colinearity = std::min(rep.min_colinearity, part.min_colinearity);
    rep.max_abs_arg_when_colinear = std::max(rep.max_abs_arg_when_colinear, part.max_arg);
    worst.insert(worst.end(), part.worst.begin(), part.worst.end());
  }
  std::sort(worst.begin(), worst.end(), [](const Scored& a, const Scored& b) {
    return a.value < b.value || (a.value == b.value && a.index < b.index);
  });
  if (worst.size() > opt.polish_runs) worst.resize(opt.polish_runs);

  if (rep.samples == 0) {
    rep.inconclusive = true;
    rep.verdict = false;
    rep.min_defect = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.min_defect = 2.0;
  std::vector<std::pair<RealVector, double>> polished(worst.size());
  parallel_chunks(worst.size(), [&](std::size_t k) {
    polished[k] = detail::polish_defect(probe, seq.on_metric_sphere(worst[k].index, q, radius), worst[k].value, radius);
  });
  for (std::size_t k = 0; k < polished.size(); ++k) {
    if (polished[k].second < rep.min_defect) {
      rep.min_defect = polished[k].second;
      rep.witness = polished[k].first;
    }
  }
  rep.polish_runs = polished.size();
  rep.verdict = rep.min_defect > opt.pass_threshold;
  return rep;
}

inline TransversalityReport d_regularity_search(const MixedGerm& germ, double radius, std::size_t budget,
                                                std::uint64_t seed, const RegularityOptions& opt = {}) {
  const auto dim = static_cast<Eigen::Index>(2 * germ.n_vars());
  return d_regularity_search(germ, radius, RealMatrix::Identity(dim, dim), budget, seed, opt);
}

// ---------------------------------------------------------------------------
// Sampling scans shared report

struct ScanReport {
  double min_value = std::numeric_limits<double>::infinity();
  RealVector witness;
  std::size_t budget = 0;
  std::size_t usable = 0;
  std::size_t excluded = 0;  // axis tube or failed projection
  bool inconclusive = false;
  bool verdict = false;

  double excluded_fraction() const { return budget ? static_cast<double>(excluded) / static_cast<double>(budget) : 0.0; }
};

namespace detail {

template <typename Eval>  // Eval: (index) -> optional<pair<value, point>>
ScanReport min_scan(std::size_t budget, std::size_t chunk, const Eval& eval) {
  struct Part {
    double best = std::numeric_limits<double>::infinity();
    RealVector witness;
    std::size_t usable = 0;
  };
  const std::size_t chunks = (budget + chunk - 1) / chunk;
  std::vector<Part> parts(chunks);
  parallel_chunks(chunks, [&](std::size_t c) {
    for (std::size_t i = c * chunk; i < std::min(budget, (c + 1) * chunk); ++i) {
      auto r = eval(i);
      if (!r) continue;
      ++parts[c].usable;
      if (r->first < parts[c].best) {
        parts[c].best = r->first;
        parts[c].witness = std::move(r->second);
      }
    }
  });
  ScanReport rep;
  rep.budget = budget;
  for (auto& p : parts) {
    rep.usable += p.usable;
    if (p.best < rep.min_value) {
      rep.min_value = p.best;
      rep.witness = std::move(p.witness);
    }
  }
  rep.excluded = budget - rep.usable;
  rep.inconclusive = 10 * rep.usable < budget;
  return rep;
}

}  // namespace detail

/// Strong Milnor property evidence: on the sphere off the link tube, the
/// differential of phi = f/|f| restricted to the tangent space of the sphere
/// must be onto T S^1. Its only singular value is |P_T grad theta|; the
/// reported margin is radius * |P_T grad theta| (scale-free).
inline ScanReport strong_milnor_check(const MixedGerm& germ, double radius, std::size_t budget, std::uint64_t seed,
                                      const RegularityOptions& opt = {}) {
  require(radius > 0.0, "radius must be positive");
  const SphereSequence seq(2 * germ.n_vars(), seed);
  const double floor = opt.f_floor_rel * germ.scale(radius);
  ScanReport rep = detail::min_scan(budget, opt.chunk, [&](std::size_t i) -> std::optional<std::pair<double, RealVector>> {
    const RealVector x = radius * seq.unit(i);
    if (!(std::abs(germ.value(x)) > floor)) return std::nullopt;
    const DifferentialSample s = differential_sample(germ, x, floor);
    const RealVector u = x / radius;
    const RealVector tangential = s.grad_theta - s.grad_theta.dot(u) * u;
    return std::make_pair(radius * tangential.norm(), x);
  });
  rep.verdict = !rep.inconclusive && rep.min_value > opt.pass_threshold;
  return rep;
}

/// Milnor-tube boundary condition: on S_eps intersected with |f| = eta, the
/// radial direction must stay out of the fiber-normal plane span(grad a, grad b).
/// The residual is the distance of x/|x| from that plane.
inline ScanReport tube_sphere_transversality(const MixedGerm& germ, double eps, double eta, std::size_t budget,
                                             std::uint64_t seed, const RegularityOptions& opt = {}) {
  require(eps > 0.0 && eta > 0.0 && eta < eps, "tube check needs 0 < eta < eps");
  const SphereSequence seq(2 * germ.n_vars(), seed);
  const double log_eta = std::log(eta);
  const double floor = 1e-3 * eta;
  ScanReport rep = detail::min_scan(budget, opt.chunk, [&](std::size_t i) -> std::optional<std::pair<double, RealVector>> {
    const ConstraintFn constraints = [&](const RealVector& x) -> std::optional<ConstraintEval> {
      const WirtingerJet jet = germ.jet(to_complex(x));
      const double rho = std::abs(jet.value);
      if (!(rho > floor)) return std::nullopt;
      RealVector ga, gb;
      real_gradients(jet, ga, gb);
      ConstraintEval e{RealVector(2), RealMatrix(2, x.size())};
      e.residual[0] = std::log(rho) - log_eta;
      e.residual[1] = (x.squaredNorm() - eps * eps) / (2.0 * eps);
      e.jacobian.row(0) = ((jet.value.real() * ga + jet.value.imag() * gb) / (rho * rho)).transpose();
      e.jacobian.row(1) = (x / eps).transpose();
      return e;
    };
    ProjectionOptions popt;
    popt.tolerance = 1e-12;
    popt.max_step = 0.25 * eps;
    const auto x = project_onto(constraints, eps * seq.unit(i), popt);
    if (!x) return std::nullopt;
    RealVector ga, gb;
    real_gradients(germ.jet(to_complex(*x)), ga, gb);
    RealMatrix span(x->size(), 2);
    span.col(0) = ga;
    span.col(1) = gb;
    const RealVector u = x->normalized();
    const RealVector coeffs = span.colPivHouseholderQr().solve(u);
    return std::make_pair((u - span * coeffs).norm(), *x);
  });
  if (rep.usable == 0) throw Error(ErrorKind::ProjectionFailure, "no seed projected onto the tube boundary");
  rep.verdict = !rep.inconclusive && rep.min_value > opt.pass_threshold;
  return rep;
}

struct IsolationReport {
  ScanReport scan;              // min of the raw rank-2 margin
  double min_relative_margin;   // min of margin * |x| / |f|
};

/// Samples the ball of the given radius (points with |f| <= f_floor are
/// excluded and counted) and records the smallest second singular value of the
/// real Jacobian. The verdict uses the scale-free margin * |x| / |f|.
inline IsolationReport critical_value_isolation_scan(const MixedGerm& germ, double radius, std::size_t budget,
                                                     double f_floor, std::uint64_t seed,
                                                     const RegularityOptions& opt = {}) {
  require(radius > 0.0, "radius must be positive");
  const std::size_t dim = 2 * germ.n_vars();
  const KroneckerSequence seq(dim + 1, seed);
  std::vector<double> relative((budget + opt.chunk - 1) / opt.chunk, std::numeric_limits<double>::infinity());
  ScanReport rep = detail::min_scan(budget, opt.chunk, [&](std::size_t i) -> std::optional<std::pair<double, RealVector>> {
    const auto u = seq.point(i);
    RealVector g(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim; ++k) g[static_cast<Eigen::Index>(k)] = normal_quantile(u[k]);
    const RealVector x = radius * std::pow(u[dim], 1.0 / static_cast<double>(dim)) * g.normalized();
    const double m = std::abs(germ.value(x));
    if (!(m > f_floor)) return std::nullopt;
    const double margin = jacobian_rank_margin(germ, x);
    double& r = relative[i / opt.chunk];
    r = std::min(r, margin * x.norm() / m);
    return std::make_pair(margin, x);
  });
  IsolationReport out{rep, *std::min_element(relative.begin(), relative.end())};
  out.scan.verdict = !rep.inconclusive && out.min_relative_margin > opt.pass_threshold;
  return out;
}

}  // namespace pencillab
