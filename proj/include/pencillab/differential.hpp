#pragma once

// Real differential data of f = a + i b on R^{2n}: gradients of a, b, log|f|
// and of the argument theta = Re(-i log f).

#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/linalg.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace pencillab {

struct DifferentialSample {
  RealVector point;
  double a = 0.0;  // Re f
  double b = 0.0;  // Im f
  RealVector grad_a;
  RealVector grad_b;
  double rho = 0.0;  // |f|
  RealVector grad_log_rho;
  RealVector grad_theta;

  double theta() const { return std::atan2(b, a); }
  Complex value() const { return {a, b}; }
};

/// Real gradients of Re f and Im f assembled from the Wirtinger derivatives:
/// df/dx_j = f_z + f_zbar, df/dy_j = i (f_z - f_zbar).
inline void real_gradients(const WirtingerJet& jet, RealVector& grad_a, RealVector& grad_b) {
  const Eigen::Index n = jet.d_z.size();
  grad_a.resize(2 * n);
  grad_b.resize(2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex dx = jet.d_z[j] + jet.d_zbar[j];
    const Complex dy = Complex(0.0, 1.0) * (jet.d_z[j] - jet.d_zbar[j]);
    grad_a[2 * j] = dx.real();
    grad_a[2 * j + 1] = dy.real();
    grad_b[2 * j] = dx.imag();
    grad_b[2 * j + 1] = dy.imag();
  }
}

/// Full 2n x 2n real Hessians of Re f and Im f.
struct RealHessians {
  RealMatrix a;
  RealMatrix b;
};

inline RealHessians real_hessians(const MixedGerm& germ, const ComplexVector& z) {
  const WirtingerHessian w = germ.hessian(z);
  const Eigen::Index n = z.size();
  const Complex I(0.0, 1.0);
  ComplexMatrix h(2 * n, 2 * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const Complex A = w.zz(j, k);
      const Complex Bjk = w.zzbar(j, k);
      const Complex Bkj = w.zzbar(k, j);
      const Complex C = w.zbarzbar(j, k);
      h(2 * j, 2 * k) = A + Bjk + Bkj + C;
      h(2 * j, 2 * k + 1) = I * (A - Bjk + Bkj - C);
      h(2 * j + 1, 2 * k) = I * (A + Bjk - Bkj - C);
      h(2 * j + 1, 2 * k + 1) = -(A - Bjk - Bkj + C);
    }
  }
  return {h.real(), h.imag()};
}

/// Populates every field of DifferentialSample at x. Throws AxisProximity when
/// |f(x)| <= axis_floor; by default the floor is 1e-12 * germ.scale(|x|).
inline DifferentialSample differential_sample(const MixedGerm& germ, const RealVector& x,
                                              std::optional<double> axis_floor = std::nullopt) {
  const WirtingerJet jet = germ.jet(to_complex(x));
  DifferentialSample s;
  s.point = x;
  s.a = jet.value.real();
  s.b = jet.value.imag();
  s.rho = std::abs(jet.value);
  const double floor = axis_floor.value_or(default_axis_floor(germ, x.norm()));
  if (!(s.rho > floor))
    throw Error(ErrorKind::AxisProximity, "|f(x)| = " + std::to_string(s.rho) + " is within the axis floor");
  real_gradients(jet, s.grad_a, s.grad_b);
  const double rho2 = s.rho * s.rho;
  s.grad_log_rho = (s.a * s.grad_a + s.b * s.grad_b) / rho2;
  s.grad_theta = (s.a * s.grad_b - s.b * s.grad_a) / rho2;
  return s;
}

/// Second singular value of the 2 x 2n real Jacobian of (Re f, Im f).
inline double jacobian_rank_margin(const MixedGerm& germ, const RealVector& x) {
  RealVector ga, gb;
  real_gradients(germ.jet(to_complex(x)), ga, gb);
  const double p = ga.squaredNorm();
  const double q = gb.squaredNorm();
  const double r = ga.dot(gb);
  // eigenvalues of [[p, r], [r, q]]
  const double mean = 0.5 * (p + q);
  const double radius = std::hypot(0.5 * (p - q), r);
  const double lo = std::max(0.0, mean - radius);
  // lo via the determinant is more accurate when the two eigenvalues differ a lot
  const double hi = mean + radius;
  const double lo_det = hi > 0.0 ? std::max(0.0, p * q - r * r) / hi : 0.0;
  return std::sqrt(radius > 0.5 * mean ? lo_det : lo);
}

}  // namespace pencillab
