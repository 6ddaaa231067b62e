#pragma once

#include "pencillab/linalg.hpp"

#include <cmath>
#include <functional>
#include <optional>

namespace pencillab {

/// Residuals r(x) and their gradients (one row per constraint).
struct ConstraintEval {
  RealVector residual;
  RealMatrix jacobian;
};

using ConstraintFn = std::function<std::optional<ConstraintEval>(const RealVector&)>;

struct ProjectionOptions {
  int max_iterations = 60;
  double tolerance = 1e-13;  // on the max-norm of the residual
  double max_step = 0.0;     // 0 = unlimited, else clamp on |dx|
  bool require_convergence = true;  // false: return the last finite iterate
};

/// Gauss-Newton with minimum-norm steps onto {r(x) = 0}, backtracking until the
/// residual norm decreases. Returns nullopt if the constraint evaluation fails
/// at the start, the Gram matrix degenerates, no step decreases the residual,
/// or the iteration does not reach the tolerance.
inline std::optional<RealVector> project_onto(const ConstraintFn& constraints, RealVector x,
                                              const ProjectionOptions& opt = {}) {
  auto eval = constraints(x);
  if (!eval) return std::nullopt;
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (eval->residual.lpNorm<Eigen::Infinity>() <= opt.tolerance) return x;
    const auto sol = min_norm_solve(eval->jacobian, -eval->residual, 1e14);
    if (!sol) return opt.require_convergence ? std::nullopt : std::optional<RealVector>(x);
    RealVector dx = sol->velocity;
    if (opt.max_step > 0.0 && dx.norm() > opt.max_step) dx *= opt.max_step / dx.norm();
    if (!dx.allFinite()) return opt.require_convergence ? std::nullopt : std::optional<RealVector>(x);
    const double r0 = eval->residual.norm();
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-9; alpha *= 0.5) {
      const RealVector y = x + alpha * dx;
      auto next = constraints(y);
      if (next && next->residual.allFinite() && next->residual.norm() < r0) {
        x = y;
        eval = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) return opt.require_convergence ? std::nullopt : std::optional<RealVector>(x);
  }
  if (!opt.require_convergence) return x;
  if (eval->residual.lpNorm<Eigen::Infinity>() <= opt.tolerance) return x;
  return std::nullopt;
}

}  // namespace pencillab
