#pragma once

// Deterministic randomness. Every random quantity is derived from one 64-bit
// job seed through counter-based streams, so results do not depend on how the
// work is split across threads.

#include "pencillab/linalg.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace pencillab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// Independent generator for task `task` of the job seeded with `seed`.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t task) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(task + 0x632BE59BD9B4E019ULL)));
}

/// Kronecker (generalized golden ratio) low-discrepancy sequence on [0,1)^d
/// with a seed-dependent Cranley-Patterson shift. Point i is computed directly.
class KroneckerSequence {
 public:
  KroneckerSequence(std::size_t dim, std::uint64_t seed) : alpha_(dim), shift_(dim) {
    // phi_d: unique positive root of x^{d+1} = x + 1
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(dim + 1));
    auto rng = stream(seed, 0x5EED);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k = 0; k < dim; ++k) {
      alpha_[k] = std::fmod(1.0 / std::pow(phi, static_cast<double>(k + 1)), 1.0);
      shift_[k] = u(rng);
    }
  }

  std::size_t dim() const { return alpha_.size(); }

  /// Coordinates strictly inside (0,1).
  std::vector<double> point(std::uint64_t i) const {
    std::vector<double> p(alpha_.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      // i * alpha mod 1 in two parts to keep precision for large i
      const double hi = std::fmod(static_cast<double>(i >> 20U) * std::fmod(alpha_[k] * 1048576.0, 1.0), 1.0);
      const double lo = std::fmod(static_cast<double>(i & 0xFFFFFU) * alpha_[k], 1.0);
      double v = std::fmod(shift_[k] + hi + lo, 1.0);
      p[k] = std::clamp(v, 1e-15, 1.0 - 1e-15);
    }
    return p;
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> shift_;
};

inline double normal_quantile(double p) { return std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0); }

/// Point i of a quasi-uniform sequence on the unit sphere of R^d (Gaussian
/// map of the Kronecker sequence, then normalized).
class SphereSequence {
 public:
  SphereSequence(std::size_t dim, std::uint64_t seed) : seq_(dim, seed) {}

  RealVector unit(std::uint64_t i) const {
    const auto u = seq_.point(i);
    RealVector g(static_cast<Eigen::Index>(u.size()));
    for (std::size_t k = 0; k < u.size(); ++k) g[static_cast<Eigen::Index>(k)] = normal_quantile(u[k]);
    const double norm = g.norm();
    if (!(norm > 0.0)) {
      g.setZero();
      g[0] = 1.0;
      return g;
    }
    return g / norm;
  }

  /// Point on the metric sphere {x : x^T Q x = radius^2}.
  RealVector on_metric_sphere(std::uint64_t i, const RealMatrix& q, double radius) const {
    const RealVector u = unit(i);
    return radius * u / std::sqrt(u.dot(q * u));
  }

 private:
  KroneckerSequence seq_;
};

inline RealVector random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  RealVector v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = g(rng);
  } while (v.norm() < 1e-8);
  return v.normalized();
}

/// Worker count: hardware concurrency, capped by PENCILLAB_THREADS when set.
inline unsigned worker_count() {
  unsigned n = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PENCILLAB_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Runs body(chunk_index) for chunk_index in [0, chunks). Chunks are
/// independent; callers store per-chunk results by index and reduce them in
/// index order afterwards, which keeps reductions deterministic.
inline void parallel_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::min<std::size_t>(worker_count(), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) body(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pencillab
