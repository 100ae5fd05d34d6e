#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>

#include "gpcentaur/error.hpp"

namespace gpc {

/// Exact rational number for dimension exponents.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) {
    if (d == 0) throw Error(ErrorCode::UnitError, "zero denominator in rational");
    reduce();
  }

  /// Best rational approximation with denominator <= max_den, or nullopt-like
  /// failure signalled through ok=false when no such approximation is exact
  /// to 1e-12.
  static Rational from_double(double x, bool& ok, std::int64_t max_den = 10000) {
    ok = false;
    if (!std::isfinite(x)) return {};
    // continued fractions
    std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double v = x;
    for (int it = 0; it < 64; ++it) {
      double a = std::floor(v);
      if (std::abs(a) > 1e15) break;
      auto ai = static_cast<std::int64_t>(a);
      std::int64_t h2 = ai * h1 + h0, k2 = ai * k1 + k0;
      if (k2 > max_den) break;
      h0 = h1; h1 = h2; k0 = k1; k1 = k2;
      if (std::abs(static_cast<double>(h1) / static_cast<double>(k1) - x) <= 1e-12 * std::max(1.0, std::abs(x))) {
        ok = true;
        return Rational(h1, k1);
      }
      double frac = v - a;
      if (frac == 0.0) break;
      v = 1.0 / frac;
    }
    return {};
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_zero() const { return num_ == 0; }

  friend Rational operator+(Rational a, Rational b) { return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num_ * b.num_, a.den_ * b.den_}; }
  friend bool operator==(const Rational&, const Rational&) = default;

  std::string str() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

 private:
  void reduce() {
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    auto g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
  }
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Exponents over the SI base dimensions, in order m, kg, s, A, K, mol, cd.
using Dimension = std::array<Rational, 7>;

inline bool is_dimensionless(const Dimension& d) {
  for (const auto& r : d) if (!r.is_zero()) return false;
  return true;
}

inline Dimension operator+(const Dimension& a, const Dimension& b) {
  Dimension r;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Dimension operator-(const Dimension& a, const Dimension& b) {
  Dimension r;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Dimension scale_dim(const Dimension& a, Rational e) {
  Dimension r;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] * e;
  return r;
}

inline std::string to_string(const Dimension& d) {
  static constexpr std::array<const char*, 7> base = {"m", "kg", "s", "A", "K", "mol", "cd"};
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].is_zero()) continue;
    if (!s.empty()) s += "*";
    s += base[i];
    if (!(d[i] == Rational(1))) s += "^" + d[i].str();
  }
  return s.empty() ? "1" : s;
}

/// A unit: dimension plus the factor converting one of it to SI base units.
struct Units {
  Dimension dim{};
  double scale = 1.0;

  static Units dimensionless() { return {}; }
};

inline Units operator*(const Units& a, const Units& b) { return {a.dim + b.dim, a.scale * b.scale}; }
inline Units operator/(const Units& a, const Units& b) { return {a.dim - b.dim, a.scale / b.scale}; }

namespace detail {

inline Dimension dim(int m, int kg, int s, int A = 0, int K = 0, int mol = 0, int cd = 0) {
  return {Rational(m), Rational(kg), Rational(s), Rational(A), Rational(K), Rational(mol), Rational(cd)};
}

inline const std::unordered_map<std::string, Units>& unit_catalog() {
  static const std::unordered_map<std::string, Units> catalog = [] {
    std::unordered_map<std::string, Units> c;
    const double g0 = 9.80665;
    const double lbm = 0.45359237;
    c["1"] = {dim(0, 0, 0), 1.0};
    c["-"] = {dim(0, 0, 0), 1.0};
    c["rad"] = {dim(0, 0, 0), 1.0};
    c["deg"] = {dim(0, 0, 0), 3.14159265358979323846 / 180.0};
    c["percent"] = {dim(0, 0, 0), 0.01};
    // length
    c["m"] = {dim(1, 0, 0), 1.0};
    c["km"] = {dim(1, 0, 0), 1000.0};
    c["cm"] = {dim(1, 0, 0), 0.01};
    c["mm"] = {dim(1, 0, 0), 0.001};
    c["ft"] = {dim(1, 0, 0), 0.3048};
    c["in"] = {dim(1, 0, 0), 0.0254};
    c["mi"] = {dim(1, 0, 0), 1609.344};
    c["nmi"] = {dim(1, 0, 0), 1852.0};
    // volume
    c["L"] = {dim(3, 0, 0), 1e-3};
    // mass
    c["kg"] = {dim(0, 1, 0), 1.0};
    c["g"] = {dim(0, 1, 0), 1e-3};
    c["t"] = {dim(0, 1, 0), 1000.0};
    c["lb"] = {dim(0, 1, 0), lbm};
    // time
    c["s"] = {dim(0, 0, 1), 1.0};
    c["min"] = {dim(0, 0, 1), 60.0};
    c["hr"] = {dim(0, 0, 1), 3600.0};
    c["h"] = {dim(0, 0, 1), 3600.0};
    c["day"] = {dim(0, 0, 1), 86400.0};
    // speed
    c["kts"] = {dim(1, 0, -1), 1852.0 / 3600.0};
    c["knot"] = {dim(1, 0, -1), 1852.0 / 3600.0};
    c["mph"] = {dim(1, 0, -1), 1609.344 / 3600.0};
    // force, energy, power, pressure
    c["N"] = {dim(1, 1, -2), 1.0};
    c["kN"] = {dim(1, 1, -2), 1000.0};
    c["lbf"] = {dim(1, 1, -2), lbm * g0};
    c["J"] = {dim(2, 1, -2), 1.0};
    c["kJ"] = {dim(2, 1, -2), 1000.0};
    c["MJ"] = {dim(2, 1, -2), 1e6};
    c["Wh"] = {dim(2, 1, -2), 3600.0};
    c["kWh"] = {dim(2, 1, -2), 3.6e6};
    c["W"] = {dim(2, 1, -3), 1.0};
    c["kW"] = {dim(2, 1, -3), 1000.0};
    c["hp"] = {dim(2, 1, -3), 745.69987158227022};
    c["Pa"] = {dim(-1, 1, -2), 1.0};
    c["kPa"] = {dim(-1, 1, -2), 1000.0};
    // electrical, thermal, amount, luminous
    c["A"] = {dim(0, 0, 0, 1), 1.0};
    c["V"] = {dim(2, 1, -3, -1), 1.0};
    c["K"] = {dim(0, 0, 0, 0, 1), 1.0};
    c["mol"] = {dim(0, 0, 0, 0, 0, 1), 1.0};
    c["cd"] = {dim(0, 0, 0, 0, 0, 0, 1), 1.0};
    // currency-like counting unit, dimensionless
    c["USD"] = {dim(0, 0, 0), 1.0};
    return c;
  }();
  return catalog;
}

// unit := factor (('*'|'/') factor)*
// factor := (symbol | '(' unit ')') ('^' signed-number)?
class UnitParser {
 public:
  explicit UnitParser(std::string_view s) : s_(s) {}

  Units parse() {
    skip_ws();
    if (pos_ == s_.size()) return Units::dimensionless();
    Units u = unit();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return u;
  }

 private:
  Units unit() {
    Units u = factor();
    for (;;) {
      skip_ws();
      if (pos_ < s_.size() && (s_[pos_] == '*' || s_[pos_] == '/')) {
        char op = s_[pos_++];
        Units f = factor();
        u = op == '*' ? u * f : u / f;
      } else {
        return u;
      }
    }
  }

  Units factor() {
    skip_ws();
    Units base;
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      base = unit();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("expected ')'");
      ++pos_;
    } else {
      std::size_t start = pos_;
      if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '1')) {
        ++pos_;
      } else {
        while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
      std::string sym(s_.substr(start, pos_ - start));
      if (sym.empty()) fail("expected unit symbol");
      const auto& cat = unit_catalog();
      auto it = cat.find(sym);
      if (it == cat.end()) fail("unknown unit '" + sym + "'");
      base = it->second;
    }
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '^') {
      ++pos_;
      skip_ws();
      std::size_t start = pos_;
      if (pos_ < s_.size() && (s_[pos_] == '-' || s_[pos_] == '+')) ++pos_;
      while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' || s_[pos_] == '/')) ++pos_;
      std::string num(s_.substr(start, pos_ - start));
      Rational e = parse_rational(num);
      base = {scale_dim(base.dim, e), std::pow(base.scale, e.to_double())};
    }
    return base;
  }

  Rational parse_rational(const std::string& txt) {
    if (txt.empty() || txt == "-" || txt == "+") fail("expected exponent");
    auto slash = txt.find('/');
    try {
      if (slash != std::string::npos) {
        return Rational(std::stoll(txt.substr(0, slash)), std::stoll(txt.substr(slash + 1)));
      }
      bool ok = false;
      Rational r = Rational::from_double(std::stod(txt), ok);
      if (!ok) fail("exponent '" + txt + "' is not a simple rational");
      return r;
    } catch (const std::logic_error&) {
      fail("bad exponent '" + txt + "'");
    }
    return {};
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw Error(ErrorCode::UnitError, "in unit '" + std::string(s_) + "': " + msg);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses compound unit expressions such as "kg/m^3", "N*m" or "kg/(m*s)"
/// against the built-in catalog. Empty text is dimensionless.
inline Units parse_units(std::string_view text) { return detail::UnitParser(text).parse(); }

}  // namespace gpc
