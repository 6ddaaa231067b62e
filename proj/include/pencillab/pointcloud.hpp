#pragma once

// CSV and OBJ emission of sampled geometry and flow traces.

#include "pencillab/flows.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/germ_io.hpp"
#include "pencillab/linalg.hpp"
#include "pencillab/pencil.hpp"

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace pencillab {

inline void write_points_csv(std::ostream& out, const MixedGerm& germ, const std::vector<RealVector>& points) {
  for (std::size_t j = 1; j <= germ.n_vars(); ++j) out << "re_z" << j << ",im_z" << j << ",";
  out << "theta,norm,modulus\n";
  for (const RealVector& x : points) {
    for (Eigen::Index k = 0; k < x.size(); ++k) out << detail::format_double(x[k]) << ",";
    const Complex v = germ.value(x);
    out << detail::format_double(wrap_angle(std::arg(v))) << "," << detail::format_double(x.norm()) << ","
        << detail::format_double(std::abs(v)) << "\n";
  }
}

inline void write_trace_csv(std::ostream& out, const FlowTrace& trace) {
  out << "t";
  const Eigen::Index dim = trace.samples.empty() ? 0 : trace.samples.front().x.size();
  for (Eigen::Index j = 1; j <= dim / 2; ++j) out << ",re_z" << j << ",im_z" << j;
  out << ",norm,modulus,theta\n";
  for (const TraceSample& s : trace.samples) {
    out << detail::format_double(s.t);
    for (Eigen::Index k = 0; k < s.x.size(); ++k) out << "," << detail::format_double(s.x[k]);
    out << "," << detail::format_double(s.norm) << "," << detail::format_double(s.modulus) << ","
        << detail::format_double(s.theta) << "\n";
  }
}

/// Stereographic projection of S^3 (points are first normalized) from `pole`
/// onto the hyperplane orthogonal to it, in an orthonormal basis of that hyperplane.
inline Eigen::Vector3d stereographic(const RealVector& x, const RealVector& pole) {
  const RealVector p = pole.normalized();
  RealMatrix col(4, 1);
  col.col(0) = p;
  const RealMatrix basis = orthogonal_complement(col);
  const RealVector u = x.normalized();
  return basis.transpose() * u / (1.0 - u.dot(p));
}

struct PoleChoice {
  RealVector pole;
  bool perturbed = false;
};

/// Keeps the pole off the surface K_theta: if radius * pole lies (numerically)
/// on X_theta it is rotated by a fixed small perturbation until it does not.
inline PoleChoice choose_pole(const MixedGerm& germ, double theta, double radius, RealVector pole) {
  require(pole.size() == 4 && pole.norm() > 0.0, "projection pole must be a nonzero 4-vector");
  PoleChoice out{pole.normalized(), false};
  const double tol = 1e-9 * germ.scale(radius);
  RealVector bump(4);
  bump << 0.0137, -0.0291, 0.0173, 0.0219;
  for (int k = 0; k < 32 && std::abs(h_theta(germ, theta, radius * out.pole)) <= tol; ++k) {
    out.pole = (out.pole + bump).normalized();
    out.perturbed = true;
  }
  return out;
}

inline void write_obj(std::ostream& out, const std::vector<RealVector>& points, const RealVector& pole) {
  out << "# stereographic projection of S^3 points\n";
  for (const RealVector& x : points) {
    const Eigen::Vector3d y = stereographic(x, pole);
    out << "v " << detail::format_double(y[0]) << " " << detail::format_double(y[1]) << " "
        << detail::format_double(y[2]) << "\n";
  }
}

}  // namespace pencillab
