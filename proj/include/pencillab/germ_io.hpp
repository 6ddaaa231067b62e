#pragma once

// Text and JSON forms of MixedGerm.
//
// Grammar (whitespace ignored):
//   expr    := term (('+' | '-') term)*
//   term    := unary ('*' unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' integer)?
//   primary := number ['i'] | 'i' | 'zK' | 'zbarK' | 'conj' '(' expr ')' | '(' expr ')'
// Variables are 1-based. A number immediately followed by 'i' is imaginary.

#include "pencillab/error.hpp"
#include "pencillab/germ.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

namespace pencillab {

namespace detail {

class GermParser {
 public:
  GermParser(std::string_view text, std::size_t n_vars) : text_(text), n_(n_vars) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_, what); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_word(std::string_view w) {
    skip_ws();
    if (text_.substr(pos_, w.size()) == w) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Polynomial expr() {
    Polynomial acc = term();
    for (;;) {
      if (accept('+'))
        acc = acc + term();
      else if (accept('-'))
        acc = acc - term();
      else
        return acc;
    }
  }

  Polynomial term() {
    Polynomial acc = unary();
    while (accept('*')) acc = acc * unary();
    return acc;
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) fail("negative or signed exponent");
    if (accept('(')) {
      const Exponent e = integer("exponent");
      expect(')');
      return base.pow(e);
    }
    pos_ = start;
    return base.pow(integer("exponent"));
  }

  Exponent integer(const char* what) {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail(std::string("expected non-negative integer ") + what);
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      fail(std::string("non-integer ") + what);
    Exponent value = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || value > kMaxExponent) {
      pos_ = start;
      fail(std::string(what) + " out of 63-bit range");
    }
    return value;
  }

  std::size_t variable_index() {
    const std::size_t at = pos_;
    const Exponent k = integer("variable index");
    if (k < 1 || k > n_) {
      pos_ = at;
      fail("variable index " + std::to_string(k) + " out of range 1.." + std::to_string(n_));
    }
    return static_cast<std::size_t>(k - 1);
  }

  Polynomial primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      expect(')');
      return p;
    }
    if (accept_word("conj")) {
      expect('(');
      Polynomial p = expr();
      expect(')');
      return p.conjugate();
    }
    if (accept_word("zbar")) return Polynomial::variable(n_, variable_index(), true);
    if (c == 'z') {
      ++pos_;
      return Polynomial::variable(n_, variable_index(), false);
    }
    if (c == 'i' && !is_ident_char(pos_ + 1)) {
      ++pos_;
      return Polynomial::constant(n_, Complex(0.0, 1.0));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  bool is_ident_char(std::size_t at) const {
    return at < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[at])) || text_[at] == '_');
  }

  Polynomial number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        digits();
      else
        pos_ = save;
    }
    const std::string literal(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(literal.c_str(), &end);
    if (literal.empty() || end != literal.c_str() + literal.size()) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ < text_.size() && text_[pos_] == 'i' && !is_ident_char(pos_ + 1)) {
      ++pos_;
      return Polynomial::constant(n_, Complex(0.0, v));
    }
    return Polynomial::constant(n_, Complex(v, 0.0));
  }

  std::string_view text_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses an expression into a canonical germ (merged, zero-pruned terms).
inline MixedGerm parse_germ(std::string_view text, std::size_t n_vars) {
  require(n_vars > 0, "n_vars must be positive");
  Polynomial p = detail::GermParser(text, n_vars).parse();
  if (p.constant_term() != Complex(0.0, 0.0)) throw Error(ErrorKind::Precondition, "constant term nonzero");
  return MixedGerm(std::move(p));
}

/// Largest variable index mentioned in the text (z7, zbar7, ...); 0 if none.
inline std::size_t infer_n_vars(std::string_view text) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != 'z') continue;
    std::size_t j = i + 1;
    if (text.substr(j, 3) == "bar") j += 3;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t k = 0;
    bool any = false;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
      k = k * 10 + static_cast<std::size_t>(text[j] - '0');
      any = true;
      ++j;
    }
    if (any) best = std::max(best, k);
  }
  return best;
}

/// Canonical text form; parse_germ(to_string(g), n) reproduces g's term set exactly.
inline std::string to_string(const MixedGerm& germ) {
  std::string out;
  for (const auto& [m, c] : germ.terms()) {
    if (!out.empty()) out += " + ";
    out += "(" + detail::format_double(c.real()) + (std::signbit(c.imag()) ? " - " : " + ") +
           detail::format_double(std::abs(c.imag())) + "i)";
    for (std::size_t j = 0; j < germ.n_vars(); ++j) {
      if (m.holo[j] > 0) out += "*z" + std::to_string(j + 1) + "^" + std::to_string(m.holo[j]);
      if (m.anti[j] > 0) out += "*zbar" + std::to_string(j + 1) + "^" + std::to_string(m.anti[j]);
    }
  }
  return out;
}

inline nlohmann::json to_json(const MixedGerm& germ) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [m, c] : germ.terms())
    terms.push_back({{"re", c.real()}, {"im", c.imag()}, {"p", m.holo}, {"q", m.anti}});
  return {{"n", germ.n_vars()}, {"terms", terms}};
}

inline MixedGerm germ_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    Polynomial p(n);
    for (const auto& t : j.at("terms")) {
      Monomial m{t.at("p").get<std::vector<Exponent>>(), t.at("q").get<std::vector<Exponent>>()};
      require(m.holo.size() == n && m.anti.size() == n, "term exponent length differs from n");
      p.add_term(m, Complex(t.at("re").get<double>(), t.at("im").get<double>()));
    }
    return MixedGerm(std::move(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("germ JSON: ") + e.what());
  }
}

}  // namespace pencillab
