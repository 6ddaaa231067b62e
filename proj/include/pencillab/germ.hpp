#pragma once

// Sparse mixed polynomials sum c * z^p * conj(z)^q and the germ type built on
// them.
//
// Gradient convention: for a holomorphic germ, grad f := conj(df/dz), so that
// df/dt = <dp/dt, grad f> with <u, v> = sum u_j conj(v_j). Every module uses
// this convention.

#include "pencillab/error.hpp"
#include "pencillab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace pencillab {

using Exponent = std::uint64_t;
inline constexpr Exponent kMaxExponent = static_cast<Exponent>(std::numeric_limits<std::int64_t>::max());

struct Monomial {
  std::vector<Exponent> holo;
  std::vector<Exponent> anti;

  auto operator<=>(const Monomial&) const = default;
  bool operator==(const Monomial&) const = default;

  bool is_constant() const {
    return std::all_of(holo.begin(), holo.end(), [](Exponent e) { return e == 0; }) &&
           std::all_of(anti.begin(), anti.end(), [](Exponent e) { return e == 0; });
  }

  Exponent total_degree() const {
    Exponent d = 0;
    for (Exponent e : holo) d += e;
    for (Exponent e : anti) d += e;
    return d;
  }
};

/// Polynomial in z and conj(z); may carry a constant term. Used as the
/// arithmetic workhorse of the parser, and as the storage of MixedGerm.
class Polynomial {
 public:
  using TermMap = std::map<Monomial, Complex>;

  explicit Polynomial(std::size_t n_vars = 0) : n_(n_vars) {}

  static Polynomial constant(std::size_t n_vars, Complex c) {
    Polynomial p(n_vars);
    p.add_term(Monomial{std::vector<Exponent>(n_vars, 0), std::vector<Exponent>(n_vars, 0)}, c);
    return p;
  }

  static Polynomial variable(std::size_t n_vars, std::size_t index, bool conjugate) {
    Monomial m{std::vector<Exponent>(n_vars, 0), std::vector<Exponent>(n_vars, 0)};
    (conjugate ? m.anti : m.holo)[index] = 1;
    Polynomial p(n_vars);
    p.add_term(std::move(m), 1.0);
    return p;
  }

  std::size_t n_vars() const { return n_; }
  const TermMap& terms() const { return terms_; }

  /// Adds c * m, merging with an existing monomial and pruning exact zeros.
  void add_term(const Monomial& m, Complex c) {
    if (c == Complex(0.0, 0.0)) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Complex(0.0, 0.0)) terms_.erase(it);
    }
  }

  Complex constant_term() const {
    for (const auto& [m, c] : terms_)
      if (m.is_constant()) return c;
    return 0.0;
  }

  Polynomial operator-() const {
    Polynomial r(n_);
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    Polynomial r = a;
    for (const auto& [m, c] : b.terms_) r.add_term(m, c);
    return r;
  }

  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial r(a.n_);
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        Monomial m{ma.holo, ma.anti};
        for (std::size_t j = 0; j < a.n_; ++j) {
          m.holo[j] = checked_add(m.holo[j], mb.holo[j]);
          m.anti[j] = checked_add(m.anti[j], mb.anti[j]);
        }
        r.add_term(m, ca * cb);
      }
    }
    return r;
  }

  Polynomial pow(Exponent e) const {
    Polynomial result = constant(n_, 1.0);
    Polynomial base = *this;
    while (e > 0) {
      if (e & 1U) result = result * base;
      e >>= 1U;
      if (e > 0) base = base * base;
    }
    return result;
  }

  /// conj(sum c z^p zbar^q) = sum conj(c) z^q zbar^p.
  Polynomial conjugate() const {
    Polynomial r(n_);
    for (const auto& [m, c] : terms_) r.add_term(Monomial{m.anti, m.holo}, std::conj(c));
    return r;
  }

 private:
  static Exponent checked_add(Exponent a, Exponent b) {
    if (a > kMaxExponent - b) throw Error(ErrorKind::Overflow, "exponent exceeds 63-bit range");
    return a + b;
  }

  std::size_t n_;
  TermMap terms_;
};

/// First-order Wirtinger data at a point: value, df/dz_j, df/dconj(z_j).
struct WirtingerJet {
  Complex value;
  ComplexVector d_z;
  ComplexVector d_zbar;
};

/// Second-order Wirtinger data. zz(j,k) = d2f/dz_j dz_k,
/// zzbar(j,k) = d2f/dz_j dconj(z_k), zbarzbar(j,k) = d2f/dconj(z_j) dconj(z_k).
struct WirtingerHessian {
  ComplexMatrix zz;
  ComplexMatrix zzbar;
  ComplexMatrix zbarzbar;
};

/// Polynomial map-germ (C^n, 0) -> (C, 0), possibly mixed (involving conj(z)).
/// Immutable after construction.
class MixedGerm {
 public:
  /// Rejects a nonzero constant term and mismatched exponent lengths.
  explicit MixedGerm(Polynomial poly) : poly_(std::move(poly)) {
    require(poly_.n_vars() > 0, "germ needs at least one variable");
    for (const auto& [m, c] : poly_.terms()) {
      require(m.holo.size() == poly_.n_vars() && m.anti.size() == poly_.n_vars(),
              "exponent tuple length differs from n_vars");
      if (m.is_constant()) throw Error(ErrorKind::Precondition, "constant term nonzero: germ must vanish at the origin");
    }
    require(!poly_.terms().empty(), "germ is identically zero");
    for (const auto& [m, c] : poly_.terms()) {
      max_abs_coeff_ = std::max(max_abs_coeff_, std::abs(c));
      const Exponent d = m.total_degree();
      degree_ = std::max(degree_, d);
      order_ = order_ == 0 ? d : std::min(order_, d);
      for (std::size_t j = 0; j < poly_.n_vars(); ++j) {
        max_holo_ = std::max(max_holo_, m.holo[j]);
        max_anti_ = std::max(max_anti_, m.anti[j]);
      }
    }
  }

  std::size_t n_vars() const { return poly_.n_vars(); }
  const Polynomial& polynomial() const { return poly_; }
  const Polynomial::TermMap& terms() const { return poly_.terms(); }

  bool is_holomorphic() const {
    for (const auto& [m, c] : poly_.terms())
      for (Exponent e : m.anti)
        if (e != 0) return false;
    return true;
  }

  Exponent degree() const { return degree_; }
  Exponent order() const { return order_; }
  double max_abs_coefficient() const { return max_abs_coeff_; }

  /// max |coefficient| * radius^degree: the magnitude floors are relative to this.
  double scale(double radius) const {
    return max_abs_coeff_ * std::pow(radius, static_cast<double>(degree_));
  }

  Complex value(const ComplexVector& z) const {
    const Powers pw(z, max_holo_, max_anti_);
    Complex s = 0.0;
    for (const auto& [m, c] : poly_.terms()) {
      Complex t = c;
      for (std::size_t j = 0; j < n_vars(); ++j) t *= pw.holo(j, m.holo[j]) * pw.anti(j, m.anti[j]);
      s += t;
    }
    return s;
  }

  Complex value(const RealVector& x) const { return value(to_complex(x)); }

  WirtingerJet jet(const ComplexVector& z) const {
    const std::size_t n = n_vars();
    const Powers pw(z, max_holo_, max_anti_);
    WirtingerJet out{0.0, ComplexVector::Zero(n), ComplexVector::Zero(n)};
    std::vector<Complex> h(n), a(n);
    for (const auto& [m, c] : poly_.terms()) {
      for (std::size_t j = 0; j < n; ++j) {
        h[j] = pw.holo(j, m.holo[j]);
        a[j] = pw.anti(j, m.anti[j]);
      }
      out.value += c * product_except(h, a, n);
      for (std::size_t k = 0; k < n; ++k) {
        const Complex rest = c * product_except(h, a, k);
        if (m.holo[k] > 0)
          out.d_z[k] += rest * static_cast<double>(m.holo[k]) * pw.holo(k, m.holo[k] - 1) * a[k];
        if (m.anti[k] > 0)
          out.d_zbar[k] += rest * static_cast<double>(m.anti[k]) * h[k] * pw.anti(k, m.anti[k] - 1);
      }
    }
    return out;
  }

  WirtingerHessian hessian(const ComplexVector& z) const {
    const std::size_t n = n_vars();
    const Powers pw(z, max_holo_, max_anti_);
    WirtingerHessian out{ComplexMatrix::Zero(n, n), ComplexMatrix::Zero(n, n), ComplexMatrix::Zero(n, n)};
    // Per-variable factor z^p zbar^q and its partial derivatives up to order 2.
    struct Factor {
      Complex f, fz, fzb, fzz, fzzb, fzbzb;
    };
    std::vector<Factor> fac(n);
    for (const auto& [m, c] : poly_.terms()) {
      for (std::size_t j = 0; j < n; ++j) {
        const Exponent p = m.holo[j];
        const Exponent q = m.anti[j];
        const double dp = static_cast<double>(p);
        const double dq = static_cast<double>(q);
        auto hz = [&](Exponent k) { return pw.holo(j, k); };
        auto az = [&](Exponent k) { return pw.anti(j, k); };
        Factor& F = fac[j];
        F.f = hz(p) * az(q);
        F.fz = p >= 1 ? dp * hz(p - 1) * az(q) : 0.0;
        F.fzb = q >= 1 ? dq * hz(p) * az(q - 1) : 0.0;
        F.fzz = p >= 2 ? dp * (dp - 1.0) * hz(p - 2) * az(q) : 0.0;
        F.fzzb = (p >= 1 && q >= 1) ? dp * dq * hz(p - 1) * az(q - 1) : 0.0;
        F.fzbzb = q >= 2 ? dq * (dq - 1.0) * hz(p) * az(q - 2) : 0.0;
      }
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          Complex others = c;
          for (std::size_t l = 0; l < n; ++l)
            if (l != j && l != k) others *= fac[l].f;
          if (j == k) {
            out.zz(j, k) += others * fac[j].fzz;
            out.zzbar(j, k) += others * fac[j].fzzb;
            out.zbarzbar(j, k) += others * fac[j].fzbzb;
          } else {
            out.zz(j, k) += others * fac[j].fz * fac[k].fz;
            out.zzbar(j, k) += others * fac[j].fz * fac[k].fzb;
            out.zbarzbar(j, k) += others * fac[j].fzb * fac[k].fzb;
          }
        }
      }
    }
    return out;
  }

  friend bool operator==(const MixedGerm& a, const MixedGerm& b) {
    return a.n_vars() == b.n_vars() && a.terms() == b.terms();
  }

 private:
  // Table of z_j^k and conj(z_j)^k for k up to the largest exponent in use.
  class Powers {
   public:
    Powers(const ComplexVector& z, Exponent max_holo, Exponent max_anti)
        : holo_(static_cast<std::size_t>(z.size())), anti_(static_cast<std::size_t>(z.size())) {
      for (Eigen::Index j = 0; j < z.size(); ++j) {
        fill(holo_[j], z[j], max_holo);
        fill(anti_[j], std::conj(z[j]), max_anti);
      }
    }
    Complex holo(std::size_t j, Exponent k) const { return holo_[j][k]; }
    Complex anti(std::size_t j, Exponent k) const { return anti_[j][k]; }

   private:
    static void fill(std::vector<Complex>& out, Complex w, Exponent max) {
      out.resize(static_cast<std::size_t>(max) + 1);
      out[0] = 1.0;
      for (Exponent k = 1; k <= max; ++k) out[k] = out[k - 1] * w;
    }
    std::vector<std::vector<Complex>> holo_, anti_;
  };

  // coefficient-free product of all per-variable factors except index `skip`
  // (skip == n means the full product).
  static Complex product_except(const std::vector<Complex>& h, const std::vector<Complex>& a, std::size_t skip) {
    Complex t = 1.0;
    for (std::size_t j = 0; j < h.size(); ++j)
      if (j != skip) t *= h[j] * a[j];
    return t;
  }

  Polynomial poly_;
  double max_abs_coeff_ = 0.0;
  Exponent degree_ = 0;
  Exponent order_ = 0;
  Exponent max_holo_ = 0;
  Exponent max_anti_ = 0;
};

/// Exact term-wise evaluation of sum c z^p conj(z)^q.
inline Complex evaluate(const MixedGerm& germ, const ComplexVector& z) { return germ.value(z); }

/// (df/dz, df/dconj z) at z, term by term.
inline std::pair<ComplexVector, ComplexVector> wirtinger_gradient(const MixedGerm& germ, const ComplexVector& z) {
  auto jet = germ.jet(z);
  return {std::move(jet.d_z), std::move(jet.d_zbar)};
}

/// Hermitian gradient of a holomorphic germ: conj(df/dz).
inline ComplexVector hermitian_gradient(const MixedGerm& germ, const ComplexVector& z) {
  return germ.jet(z).d_z.conjugate();
}

/// Default floor below which |f| counts as "on the axis V".
inline double default_axis_floor(const MixedGerm& germ, double radius) { return 1e-12 * germ.scale(radius); }

}  // namespace pencillab
