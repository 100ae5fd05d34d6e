#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gpcentaur/error.hpp"
#include "gpcentaur/units.hpp"

namespace gpc {

/// Variable-element key: a fully qualified name such as "Airplane.Wing.S"
/// or a vector element "Airplane.V[2]".
using VarKey = std::string;
using ExponentMap = std::map<VarKey, double>;

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
  char buf[32];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// c * prod(x_k ^ a_k) with c > 0. Zero exponents are never stored.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(double c, ExponentMap exps = {}, Dimension dim = {})
      : c_(c), exps_(std::move(exps)), dim_(dim) {
    if (!(c_ > 0.0) || !std::isfinite(c_)) {
      throw Error(ErrorCode::ZeroOrNegativeCoefficient,
                  "monomial coefficient must be positive and finite, got " + format_number(c_));
    }
    std::erase_if(exps_, [](const auto& kv) { return kv.second == 0.0; });
  }

  /// The monomial standing for one variable measured in `units`; the
  /// coefficient folds the unit scale so the value lives in SI base units.
  static Monomial variable(const VarKey& key, const Units& units = {}) {
    return Monomial(units.scale, {{key, 1.0}}, units.dim);
  }

  double coefficient() const { return c_; }
  const ExponentMap& exponents() const { return exps_; }
  const Dimension& dimension() const { return dim_; }
  bool is_constant() const { return exps_.empty(); }

  double exponent(const VarKey& k) const {
    auto it = exps_.find(k);
    return it == exps_.end() ? 0.0 : it->second;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) {
    return a.c_ == b.c_ && a.exps_ == b.exps_;
  }

 private:
  double c_ = 1.0;
  ExponentMap exps_;
  Dimension dim_{};
};

inline Monomial mono_mul(const Monomial& m1, const Monomial& m2) {
  ExponentMap e = m1.exponents();
  for (const auto& [k, v] : m2.exponents()) e[k] += v;
  return Monomial(m1.coefficient() * m2.coefficient(), std::move(e), m1.dimension() + m2.dimension());
}

inline Monomial mono_pow(const Monomial& m, double e) {
  ExponentMap ex;
  if (e != 0.0) {
    for (const auto& [k, v] : m.exponents()) ex.emplace(k, v * e);
  }
  Dimension d{};
  if (!is_dimensionless(m.dimension()) && e != 0.0) {
    bool ok = false;
    Rational r = Rational::from_double(e, ok);
    if (!ok) {
      throw Error(ErrorCode::UnitError, "cannot raise dimension " + to_string(m.dimension()) +
                                            " to non-rational power " + format_number(e));
    }
    d = scale_dim(m.dimension(), r);
  }
  return Monomial(std::pow(m.coefficient(), e), std::move(ex), d);
}

inline Monomial mono_div(const Monomial& m1, const Monomial& m2) { return mono_mul(m1, mono_pow(m2, -1.0)); }

inline Monomial operator*(const Monomial& a, const Monomial& b) { return mono_mul(a, b); }
inline Monomial operator/(const Monomial& a, const Monomial& b) { return mono_div(a, b); }

/// Sum of monomials in canonical order: like terms merged, terms sorted by
/// exponent map. All terms share one dimension.
class Posynomial {
 public:
  Posynomial() = default;
  Posynomial(Monomial m) : terms_{std::move(m)} {}  // NOLINT(google-explicit-constructor)
  explicit Posynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw Error(ErrorCode::InvalidArgument, "posynomial needs at least one term");
    canonicalize();
  }

  const std::vector<Monomial>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  bool is_monomial() const { return terms_.size() == 1; }
  const Monomial& as_monomial() const {
    if (!is_monomial()) throw Error(ErrorCode::NotGPRepresentable, "expected a monomial, got a sum of " + std::to_string(terms_.size()) + " terms");
    return terms_.front();
  }
  const Dimension& dimension() const { return terms_.front().dimension(); }

  /// Idempotent.
  void canonicalize() {
    check_dimensions();
    std::sort(terms_.begin(), terms_.end(),
              [](const Monomial& a, const Monomial& b) { return a.exponents() < b.exponents(); });
    std::vector<Monomial> merged;
    merged.reserve(terms_.size());
    for (auto& t : terms_) {
      if (!merged.empty() && merged.back().exponents() == t.exponents()) {
        merged.back() = Monomial(merged.back().coefficient() + t.coefficient(), merged.back().exponents(),
                                 merged.back().dimension());
      } else {
        merged.push_back(std::move(t));
      }
    }
    terms_ = std::move(merged);
  }

  friend bool operator==(const Posynomial& a, const Posynomial& b) { return a.terms_ == b.terms_; }

 private:
  void check_dimensions() const {
    for (const auto& t : terms_) {
      if (t.dimension() != terms_.front().dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "cannot add " + to_string(terms_.front().dimension()) +
                                                      " and " + to_string(t.dimension()));
      }
    }
  }

  std::vector<Monomial> terms_;
};

inline Posynomial posy_add(const Posynomial& p1, const Posynomial& p2) {
  std::vector<Monomial> t = p1.terms();
  t.insert(t.end(), p2.terms().begin(), p2.terms().end());
  return Posynomial(std::move(t));
}

inline Posynomial posy_mul(const Posynomial& p1, const Posynomial& p2) {
  std::vector<Monomial> t;
  t.reserve(p1.size() * p2.size());
  for (const auto& a : p1.terms())
    for (const auto& b : p2.terms()) t.push_back(mono_mul(a, b));
  return Posynomial(std::move(t));
}

inline Posynomial posy_div(const Posynomial& p, const Monomial& m) {
  return posy_mul(p, Posynomial(mono_pow(m, -1.0)));
}

/// Posynomials close only under non-negative integer powers.
inline Posynomial posy_pow(const Posynomial& p, unsigned n) {
  Posynomial r(Monomial(1.0));
  for (unsigned i = 0; i < n; ++i) r = posy_mul(r, p);
  return r;
}

inline Posynomial operator+(const Posynomial& a, const Posynomial& b) { return posy_add(a, b); }
inline Posynomial operator*(const Posynomial& a, const Posynomial& b) { return posy_mul(a, b); }

/// Applies `f` to every variable key; terms are re-canonicalized afterwards
/// since renaming may make two terms alike.
inline Monomial rename_keys(const Monomial& m, const std::function<VarKey(const VarKey&)>& f) {
  ExponentMap e;
  for (const auto& [k, v] : m.exponents()) e[f(k)] += v;
  return Monomial(m.coefficient(), std::move(e), m.dimension());
}

inline Posynomial rename_keys(const Posynomial& p, const std::function<VarKey(const VarKey&)>& f) {
  std::vector<Monomial> t;
  t.reserve(p.size());
  for (const auto& m : p.terms()) t.push_back(rename_keys(m, f));
  return Posynomial(std::move(t));
}

inline std::string to_string(const Monomial& m) {
  std::string s = format_number(m.coefficient());
  for (const auto& [k, v] : m.exponents()) {
    s += "*" + k;
    if (v != 1.0) s += "^" + format_number(v);
  }
  return s;
}

inline std::string to_string(const Posynomial& p) {
  std::string s;
  for (const auto& m : p.terms()) {
    if (!s.empty()) s += " + ";
    s += to_string(m);
  }
  return s;
}

enum class Relation { LessEqual, GreaterEqual, Equal };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::LessEqual: return "<=";
    case Relation::GreaterEqual: return ">=";
    case Relation::Equal: return "=";
  }
  return "?";
}

struct Origin {
  std::string text;        // source text of the relation
  std::string model_path;  // path of the constraint set it was written in
};

/// A constraint in GP normal form: body <= 1 (inequality) or body = 1
/// (equality, body is a single monomial).
struct NormalizedConstraint {
  enum class Kind { Inequality, Equality };

  Kind kind = Kind::Inequality;
  Posynomial body;
  std::string label;
  std::string owner;
  std::string note;
  Origin origin;

  bool is_equality() const { return kind == Kind::Equality; }
};

/// Rewrites lhs REL rhs into GP normal form, dividing through by the
/// monomial side. Relations outside GP (posynomial >= posynomial,
/// posynomial equalities) are rejected.
inline NormalizedConstraint normalize(const Posynomial& lhs, Relation rel, const Posynomial& rhs) {
  if (lhs.empty() || rhs.empty()) throw Error(ErrorCode::InvalidArgument, "empty side in relation");
  if (lhs.dimension() != rhs.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "left side is " + to_string(lhs.dimension()) +
                                                  ", right side is " + to_string(rhs.dimension()));
  }
  NormalizedConstraint nc;
  switch (rel) {
    case Relation::LessEqual:
      if (!rhs.is_monomial()) {
        throw Error(ErrorCode::NonConvexRelation, "'<=' needs a monomial on the right, got " + to_string(rhs));
      }
      nc.kind = NormalizedConstraint::Kind::Inequality;
      nc.body = posy_div(lhs, rhs.as_monomial());
      break;
    case Relation::GreaterEqual:
      if (!lhs.is_monomial()) {
        throw Error(ErrorCode::NonConvexRelation, "'>=' needs a monomial on the left, got " + to_string(lhs));
      }
      nc.kind = NormalizedConstraint::Kind::Inequality;
      nc.body = posy_div(rhs, lhs.as_monomial());
      break;
    case Relation::Equal:
      if (!lhs.is_monomial() || !rhs.is_monomial()) {
        throw Error(ErrorCode::NonConvexRelation, "equality needs monomials on both sides");
      }
      nc.kind = NormalizedConstraint::Kind::Equality;
      nc.body = Posynomial(mono_div(lhs.as_monomial(), rhs.as_monomial()));
      break;
  }
  return nc;
}

}  // namespace gpc
