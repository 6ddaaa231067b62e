#pragma once

#include "pencillab/pencillab.hpp"

#include <initializer_list>
#include <random>

namespace pltest {

using pencillab::Complex;
using pencillab::RealVector;

inline RealVector pt(std::initializer_list<Complex> z) {
  pencillab::ComplexVector v(static_cast<Eigen::Index>(z.size()));
  Eigen::Index k = 0;
  for (Complex c : z) v[k++] = c;
  return pencillab::to_real(v);
}

inline pencillab::MixedGerm germ(const char* text, std::size_t n) { return pencillab::parse_germ(text, n); }

inline RealVector random_point(std::mt19937_64& rng, std::size_t dim, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  RealVector x(static_cast<Eigen::Index>(dim));
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = u(rng);
  return x;
}

// Central differences of a real function of x.
template <typename F>
RealVector fd_gradient(const F& f, const RealVector& x, double h = 1e-6) {
  RealVector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    RealVector p = x, m = x;
    p[k] += h;
    m[k] -= h;
    g[k] = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

}  // namespace pltest
