#pragma once

// Euler characteristic of the link K_theta = {h_theta = 0} on S_eps in R^4 by
// counting the critical points of a generic linear functional with signs, and
// Milnor numbers of Brieskorn germs.

#include "pencillab/differential.hpp"
#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"
#include "pencillab/pencil.hpp"
#include "pencillab/projection.hpp"
#include "pencillab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace pencillab {

// ---------------------------------------------------------------------------
// Milnor numbers

struct MilnorNumberResult {
  enum class Method { ClosedForm, Staircase };
  std::uint64_t mu = 0;
  Method method = Method::ClosedForm;
  std::vector<std::uint64_t> exponents;
};

inline constexpr std::uint64_t kMuLimit = std::uint64_t{1} << 31U;

namespace detail {
inline void check_exponents(const std::vector<std::uint64_t>& a) {
  require(!a.empty(), "need at least one exponent");
  for (auto e : a) require(e >= 2, "Brieskorn exponents must be >= 2");
}
}  // namespace detail

/// mu = prod (a_i - 1).
inline MilnorNumberResult closed_form_mu(const std::vector<std::uint64_t>& exponents) {
  detail::check_exponents(exponents);
  std::uint64_t mu = 1;
  for (auto e : exponents) {
    if (mu > kMuLimit / (e - 1)) throw Error(ErrorKind::Overflow, "Milnor number exceeds 2^31");
    mu *= e - 1;
  }
  return {mu, MilnorNumberResult::Method::ClosedForm, exponents};
}

/// Counts the monomials z^k outside the Jacobian ideal (z_i^{a_i - 1}) by
/// walking the box prod [0, a_i - 2] with an odometer; no product formula.
inline MilnorNumberResult staircase_mu(const std::vector<std::uint64_t>& exponents) {
  detail::check_exponents(exponents);
  long double bound = 1.0L;
  for (auto e : exponents) bound *= static_cast<long double>(e - 1);
  if (bound > static_cast<long double>(kMuLimit)) throw Error(ErrorKind::Overflow, "Milnor number exceeds 2^31");

  const std::size_t n = exponents.size();
  std::vector<std::uint64_t> k(n, 0);
  std::uint64_t count = 0;
  for (;;) {
    bool outside_ideal = true;  // z^k not divisible by any generator
    for (std::size_t i = 0; i < n; ++i)
      if (k[i] >= exponents[i] - 1) outside_ideal = false;
    if (outside_ideal) ++count;
    std::size_t i = 0;
    while (i < n && ++k[i] > exponents[i] - 2) k[i++] = 0;
    if (i == n) break;
  }
  return {count, MilnorNumberResult::Method::Staircase, exponents};
}

/// Exponents (a_1, ..., a_n) if the germ is sum c_j z_j^{a_j} with every
/// variable appearing exactly once.
inline std::optional<std::vector<std::uint64_t>> brieskorn_exponents(const MixedGerm& germ) {
  if (!germ.is_holomorphic() || germ.terms().size() != germ.n_vars()) return std::nullopt;
  std::vector<std::uint64_t> a(germ.n_vars(), 0);
  for (const auto& [m, c] : germ.terms()) {
    std::size_t nonzero = 0, which = 0;
    for (std::size_t j = 0; j < m.holo.size(); ++j)
      if (m.holo[j] != 0) {
        ++nonzero;
        which = j;
      }
    if (nonzero != 1 || a[which] != 0 || m.holo[which] < 2) return std::nullopt;
    a[which] = m.holo[which];
  }
  return a;
}

// ---------------------------------------------------------------------------
// Morse inventory of a linear functional on K_theta

struct MorseOptions {
  std::size_t batch_size = 200;
  std::size_t stability_batches = 20;
  std::size_t max_seeds = 100'000;
  double dedup_tol_rel = 1e-6;
  double degeneracy_tol = 1e-9;
  double newton_tol = 1e-10;
  int max_redraws = 10;
  int max_iterations = 80;
};

struct CriticalPoint {
  RealVector x;
  double ell_value = 0.0;
  double lambda1 = 0.0;  // multiplier of |x|^2
  double lambda2 = 0.0;  // multiplier of h_theta
  int index_sign = 0;
  double residual = 0.0;
};

struct MorseInventory {
  std::vector<CriticalPoint> critical_points;
  long euler = 0;
  std::size_t stability = 0;
  std::size_t batches = 0;
  std::size_t seeds_used = 0;
  std::size_t newton_failures = 0;
  RealVector ell;
  int redraws = 0;
  double theta = 0.0;
  double radius = 0.0;
};

/// Thrown on Unstable / DegenerateAfterRetries / odd-chi; carries what was found.
class MorseError : public Error {
 public:
  MorseError(ErrorKind kind, const std::string& what, MorseInventory partial)
      : Error(kind, what), partial_(std::move(partial)) {}
  const MorseInventory& partial() const { return partial_; }

 private:
  MorseInventory partial_;
};

namespace detail {

class LinkSurface {
 public:
  LinkSurface(const MixedGerm& germ, double theta, double radius)
      : germ_(germ), c_(std::cos(theta)), s_(std::sin(theta)), radius_(radius), scale_(germ.scale(radius)) {}

  struct Local {
    double h;
    RealVector grad_h;
  };

  Local local(const RealVector& x) const {
    const WirtingerJet jet = germ_.jet(to_complex(x));
    RealVector ga, gb;
    real_gradients(jet, ga, gb);
    return {c_ * jet.value.imag() - s_ * jet.value.real(), c_ * gb - s_ * ga};
  }

  RealMatrix hessian_h(const RealVector& x) const {
    const RealHessians h = real_hessians(germ_, to_complex(x));
    return c_ * h.b - s_ * h.a;
  }

  std::optional<RealVector> retract(const RealVector& y) const {
    const ConstraintFn cons = [&](const RealVector& x) -> std::optional<ConstraintEval> {
      const Local l = local(x);
      ConstraintEval e{RealVector(2), RealMatrix(2, x.size())};
      e.residual[0] = l.h / scale_;
      e.residual[1] = (x.squaredNorm() - radius_ * radius_) / (2.0 * radius_);
      e.jacobian.row(0) = l.grad_h.transpose() / scale_;
      e.jacobian.row(1) = (x / radius_).transpose();
      return e;
    };
    ProjectionOptions opt;
    opt.max_iterations = 40;
    opt.tolerance = 1e-14;
    opt.max_step = 0.25 * radius_;
    return project_onto(cons, y, opt);
  }

  struct Frame {
    RealMatrix tangent;  // 4 x 2 orthonormal
    double lambda1, lambda2;
    RealVector grad;     // Riemannian gradient of ell in tangent coordinates
    RealMatrix hess;     // 2 x 2 Hessian of the Lagrangian on the tangent plane
    double lagrange_residual;
  };

  std::optional<Frame> frame(const RealVector& x, const RealVector& ell) const {
    const Local l = local(x);
    RealMatrix normals(x.size(), 2);
    normals.col(0) = 2.0 * x;
    normals.col(1) = l.grad_h;
    Eigen::ColPivHouseholderQR<RealMatrix> qr(normals);
    if (qr.rank() < 2) return std::nullopt;
    const Eigen::Vector2d lam = qr.solve(ell);
    Frame fr;
    fr.lambda1 = lam[0];
    fr.lambda2 = lam[1];
    fr.tangent = orthogonal_complement(normals);
    fr.grad = fr.tangent.transpose() * ell;
    const RealMatrix hess_l = -2.0 * fr.lambda1 * RealMatrix::Identity(x.size(), x.size()) - fr.lambda2 * hessian_h(x);
    fr.hess = fr.tangent.transpose() * hess_l * fr.tangent;
    fr.lagrange_residual = std::max({(ell - normals * lam).norm(), std::abs(l.h) / scale_,
                                     std::abs(x.squaredNorm() - radius_ * radius_) / (radius_ * radius_)});
    return fr;
  }

  double radius() const { return radius_; }

 private:
  const MixedGerm& germ_;
  double c_, s_, radius_, scale_;
};

/// Levenberg-Marquardt on the Riemannian gradient of ell restricted to K.
inline std::optional<CriticalPoint> find_critical_point(const LinkSurface& surf, const RealVector& ell,
                                                        RealVector x, const MorseOptions& opt) {
  auto start = surf.retract(x);
  if (!start) return std::nullopt;
  x = *start;
  auto fr = surf.frame(x, ell);
  if (!fr) return std::nullopt;
  double mu = 1e-3;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const double gnorm = fr->grad.norm();
    if (gnorm < 1e-13) break;
    const RealMatrix& h = fr->hess;
    const Eigen::Vector2d step =
        -(h.transpose() * h + mu * RealMatrix::Identity(2, 2)).ldlt().solve(h.transpose() * fr->grad);
    RealVector dx = fr->tangent * step;
    if (dx.norm() > 0.3 * surf.radius()) dx *= 0.3 * surf.radius() / dx.norm();
    auto y = surf.retract(x + dx);
    std::optional<LinkSurface::Frame> fy;
    if (y) fy = surf.frame(*y, ell);
    if (fy && fy->grad.norm() < gnorm) {
      x = *y;
      fr = std::move(fy);
      mu = std::max(mu * 0.1, 1e-12);
    } else {
      mu *= 10.0;
      if (mu > 1e8) break;
    }
  }
  if (!(fr->lagrange_residual < opt.newton_tol)) return std::nullopt;
  CriticalPoint cp;
  cp.x = x;
  cp.ell_value = ell.dot(x);
  cp.lambda1 = fr->lambda1;
  cp.lambda2 = fr->lambda2;
  cp.residual = fr->lagrange_residual;
  const double det = (surf.radius() * fr->hess).determinant();
  cp.index_sign = std::abs(det) < opt.degeneracy_tol ? 0 : (det > 0.0 ? 1 : -1);
  return cp;
}

inline bool lex_less(const RealVector& a, const RealVector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace detail

/// Enumerates critical points of a random unit linear functional on
/// K_theta = X_theta intersected with S_eps (n = 2) and returns chi = sum of
/// index signs. A degenerate critical point triggers a fresh functional.
inline MorseInventory link_surface_euler(const MixedGerm& germ, double theta, double radius, std::uint64_t seed,
                                         const MorseOptions& opt = {}) {
  require(germ.n_vars() == 2, "Euler characteristic of links is implemented for plane curves (n = 2)");
  require(radius > 0.0, "radius must be positive");
  const detail::LinkSurface surf(germ, theta, radius);
  const double dedup = opt.dedup_tol_rel * radius;

  for (int redraw = 0; redraw <= opt.max_redraws; ++redraw) {
    auto rng = stream(seed, 1000 + static_cast<std::uint64_t>(redraw));
    MorseInventory inv;
    inv.ell = random_unit_vector(rng, 4);
    inv.redraws = redraw;
    inv.theta = theta;
    inv.radius = radius;
    const SphereSequence seeds(4, splitmix64(seed + static_cast<std::uint64_t>(redraw)));
    bool degenerate = false;
    std::uint64_t next = 0;
    while (inv.stability < opt.stability_batches) {
      if (inv.seeds_used + opt.batch_size > opt.max_seeds) {
        throw MorseError(ErrorKind::Unstable,
                         "no stable inventory within " + std::to_string(opt.max_seeds) + " seeds", inv);
      }
      std::vector<std::optional<CriticalPoint>> found(opt.batch_size);
      parallel_chunks(opt.batch_size, [&](std::size_t k) {
        found[k] = detail::find_critical_point(surf, inv.ell, radius * seeds.unit(next + k), opt);
      });
      next += opt.batch_size;
      inv.seeds_used += opt.batch_size;
      ++inv.batches;
      bool added = false;
      for (auto& cp : found) {
        if (!cp) {
          ++inv.newton_failures;
          continue;
        }
        const bool known = std::any_of(inv.critical_points.begin(), inv.critical_points.end(),
                                       [&](const CriticalPoint& p) { return (p.x - cp->x).norm() <= dedup; });
        if (known) continue;
        if (cp->index_sign == 0) {
          degenerate = true;
          break;
        }
        inv.critical_points.push_back(std::move(*cp));
        added = true;
      }
      if (degenerate) break;
      inv.stability = added ? 0 : inv.stability + 1;
    }
    if (degenerate) continue;
    std::sort(inv.critical_points.begin(), inv.critical_points.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return detail::lex_less(a.x, b.x); });
    inv.euler = 0;
    for (const auto& p : inv.critical_points) inv.euler += p.index_sign;
    if (inv.euler % 2 != 0)
      throw MorseError(ErrorKind::Unstable, "odd Euler characteristic " + std::to_string(inv.euler), inv);
    return inv;
  }
  throw MorseError(ErrorKind::DegenerateAfterRetries, "degenerate critical points for every functional drawn", {});
}

struct DoubleFiberReport {
  MorseInventory inventory;
  MilnorNumberResult mu_closed;
  MilnorNumberResult mu_staircase;
  long chi = 0;
  long expected_chi = 0;  // 2 (1 - mu)
  long genus = 0;         // (2 - chi) / 2, assuming K_theta connected
  bool irreducible = true;  // gcd(a1, a2) == 1; otherwise the curve has several branches
  bool pass = false;
};

/// chi(K_theta) against 2 (1 - mu) for a Brieskorn plane curve z1^a + z2^b.
inline DoubleFiberReport double_fiber_consistency(const MixedGerm& germ, double theta, double radius,
                                                  std::uint64_t seed, const MorseOptions& opt = {}) {
  const auto exps = brieskorn_exponents(germ);
  require(exps && exps->size() == 2, "double-of-fiber check needs a Brieskorn plane-curve germ z1^a + z2^b");
  DoubleFiberReport r;
  r.mu_closed = closed_form_mu(*exps);
  r.mu_staircase = staircase_mu(*exps);
  r.inventory = link_surface_euler(germ, theta, radius, seed, opt);
  r.chi = r.inventory.euler;
  r.expected_chi = 2 * (1 - static_cast<long>(r.mu_staircase.mu));
  r.genus = (2 - r.chi) / 2;
  r.irreducible = std::gcd((*exps)[0], (*exps)[1]) == 1;
  r.pass = r.chi == r.expected_chi && r.mu_closed.mu == r.mu_staircase.mu;
  return r;
}

}  // namespace pencillab
