#pragma once

// Realification helpers and the small dense solves shared by the modules.
//
// A point of C^n is stored as a real 2n-vector with interleaved coordinates
// (Re z1, Im z1, Re z2, Im z2, ...). Under this identification the real inner
// product equals Re of the Hermitian product <u, v> = sum u_j conj(v_j), and
// multiplication by i acts blockwise as the rotation (a, b) -> (-b, a).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>

namespace pencillab {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;

inline ComplexVector to_complex(const RealVector& x) {
  const Eigen::Index n = x.size() / 2;
  ComplexVector z(n);
  for (Eigen::Index j = 0; j < n; ++j) z[j] = Complex(x[2 * j], x[2 * j + 1]);
  return z;
}

inline RealVector to_real(const ComplexVector& z) {
  RealVector x(2 * z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    x[2 * j] = z[j].real();
    x[2 * j + 1] = z[j].imag();
  }
  return x;
}

/// Multiplication by i in realified coordinates.
inline RealVector rotate_i(const RealVector& x) {
  RealVector y(x.size());
  for (Eigen::Index j = 0; j + 1 < x.size(); j += 2) {
    y[j] = -x[j + 1];
    y[j + 1] = x[j];
  }
  return y;
}

/// Hermitian product <u, v> = sum u_j conj(v_j).
inline Complex hermitian(const ComplexVector& u, const ComplexVector& v) {
  Complex s = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) s += u[j] * std::conj(v[j]);
  return s;
}

/// Spectral condition number of a symmetric positive semi-definite matrix.
inline double spd_condition(const RealMatrix& gram) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

struct MinNormSolution {
  RealVector velocity;
  double condition = 0.0;  // of the row-equilibrated Gram matrix
};

/// Minimum-norm v with rows.row(k) . v = rhs[k]. Rows are equilibrated before
/// the condition test so the number measures geometry, not units. Returns
/// nullopt if the equilibrated Gram condition exceeds `cond_max`.
inline std::optional<MinNormSolution> min_norm_solve(const RealMatrix& rows, const RealVector& rhs,
                                                     double cond_max) {
  const Eigen::Index m = rows.rows();
  RealMatrix unit(rows.rows(), rows.cols());
  RealVector scaled(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double norm = rows.row(k).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
    unit.row(k) = rows.row(k) / norm;
    scaled[k] = rhs[k] / norm;
  }
  const RealMatrix gram = unit * unit.transpose();
  const double cond = spd_condition(gram);
  if (!(cond <= cond_max)) return std::nullopt;
  const RealVector coeffs = gram.ldlt().solve(scaled);
  return MinNormSolution{unit.transpose() * coeffs, cond};
}

/// Orthonormal basis (as columns) of the orthogonal complement of the span of
/// the given columns. Assumes the columns are linearly independent.
inline RealMatrix orthogonal_complement(const RealMatrix& columns) {
  const Eigen::Index d = columns.rows();
  const Eigen::Index k = columns.cols();
  Eigen::HouseholderQR<RealMatrix> qr(columns);
  const RealMatrix q = qr.householderQ() * RealMatrix::Identity(d, d);
  return q.rightCols(d - k);
}

inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a -= two_pi;
  return a;
}

/// Representative of `a` in (-pi, pi].
inline double wrap_signed(double a) {
  constexpr double pi = 3.14159265358979323846;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

}  // namespace pencillab
