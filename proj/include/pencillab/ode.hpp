#pragma once

// Dormand-Prince 5(4) with standard step-size control. The accept callback may
// modify the state (projection onto invariant sets), so FSAL reuse is skipped.

#include "pencillab/error.hpp"
#include "pencillab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

namespace pencillab {

struct StepControl {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 1e-3;
  double min_step = 1e-14;  // relative to the span length
  double max_step = 0.0;    // 0 = span length
  long max_steps = 2'000'000;
  bool fixed_step = false;  // ceil(span / initial_step) equal steps, no error control
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
  double last_step = 0.0;
};

/// Integrates x' = rhs(t, x) from t0 to t1 (either direction). After every
/// accepted step calls accept(t, x), which may adjust x in place and returns
/// false to stop early. rhs may throw pencillab::Error; the step is then
/// retried with a smaller size, and the error is rethrown once the step
/// collapses.
template <typename Rhs, typename Accept>
OdeStats integrate_dopri5(const Rhs& rhs, double t0, double t1, RealVector x, const StepControl& ctl,
                          const Accept& accept) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats stats;
  const double span = t1 - t0;
  if (span == 0.0) return stats;
  const double dir = span > 0.0 ? 1.0 : -1.0;
  const double length = std::abs(span);
  const double h_max = ctl.max_step > 0.0 ? ctl.max_step : length;
  const double h_min = ctl.min_step * std::max(1.0, length);
  double h = std::min(ctl.initial_step, h_max);
  double t = t0;
  if (ctl.fixed_step) {
    const double n = std::ceil(length / ctl.initial_step * (1.0 - 1e-12));
    if (!(n >= 1.0) || n > static_cast<double>(ctl.max_steps))
      throw Error(ErrorKind::StepCollapse, "fixed step count out of range");
    h = length / n;
    for (long k = 1; k <= static_cast<long>(n); ++k) {
      const double hs = dir * h;
      const RealVector k1 = rhs(t, x);
      const RealVector k2 = rhs(t + c2 * hs, x + hs * (a21 * k1));
      const RealVector k3 = rhs(t + c3 * hs, x + hs * (a31 * k1 + a32 * k2));
      const RealVector k4 = rhs(t + c4 * hs, x + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const RealVector k5 = rhs(t + c5 * hs, x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const RealVector k6 = rhs(t + hs, x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      x += hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      if (!x.allFinite()) throw Error(ErrorKind::StepCollapse, "non-finite state at fixed step");
      t = k == static_cast<long>(n) ? t1 : t0 + static_cast<double>(k) * hs;
      ++stats.accepted;
      stats.last_step = h;
      if (!accept(t, x)) return stats;
    }
    return stats;
  }

  while (dir * (t1 - t) > 0.0) {
    if (stats.accepted + stats.rejected >= ctl.max_steps) throw Error(ErrorKind::StepCollapse, "step budget exhausted");
    const bool last = h >= std::abs(t1 - t);
    const double hs = last ? (t1 - t) : dir * h;
    RealVector x_new, err;
    try {
      const RealVector k1 = rhs(t, x);
      const RealVector k2 = rhs(t + c2 * hs, x + hs * (a21 * k1));
      const RealVector k3 = rhs(t + c3 * hs, x + hs * (a31 * k1 + a32 * k2));
      const RealVector k4 = rhs(t + c4 * hs, x + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const RealVector k5 = rhs(t + c5 * hs, x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const RealVector k6 = rhs(t + hs, x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      x_new = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const RealVector k7 = rhs(t + hs, x_new);
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    } catch (const Error&) {
      ++stats.rejected;
      h *= 0.25;
      if (h < h_min) throw;
      continue;
    }
    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sc = ctl.atol + ctl.rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
      err_norm = std::max(err_norm, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(err_norm)) err_norm = 1e10;
    if (err_norm <= 1.0) {
      t = last ? t1 : t + hs;
      x = std::move(x_new);
      ++stats.accepted;
      stats.last_step = std::abs(hs);
      if (!accept(t, x)) return stats;
      const double factor = err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      h = std::min(h_max, std::abs(hs) * factor);
    } else {
      ++stats.rejected;
      h = std::abs(hs) * std::clamp(0.9 * std::pow(err_norm, -0.2), 0.1, 1.0);
      if (h < h_min) throw Error(ErrorKind::StepCollapse, "tolerance unreachable: step size collapsed");
    }
  }
  return stats;
}

}  // namespace pencillab
