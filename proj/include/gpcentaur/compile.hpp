#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gpcentaur/algebra.hpp"
#include "gpcentaur/error.hpp"
#include "gpcentaur/model.hpp"

namespace gpc {

/// Sparse row: (column, coefficient) pairs sorted by column.
using SparseRow = std::vector<std::pair<int, double>>;

/// One monomial term in log space: a . y + b, where b already includes the
/// contributions of substituted variables. The exponents of those variables
/// are kept in `fixed_a` (indices into GPProgram::fixed).
struct Term {
  SparseRow a;
  double b = 0.0;
  SparseRow fixed_a;
};

struct TermRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Monomial equality in log space: a . y + b = 0.
struct AffineRow {
  SparseRow a;
  double b = 0.0;
  SparseRow fixed_a;
};

struct FixedVariable {
  VarKey key;
  double value = 1.0;
  std::string set_path;  // declaring set
};

/// Log-space standard form: minimize lse_0(y) s.t. lse_i(y) <= 0,
/// a_j . y + b_j = 0.
struct GPProgram {
  std::vector<VarKey> columns;               // free variables, sorted
  std::vector<Term> terms;                   // objective terms first, then inequalities
  TermRange objective;
  std::vector<TermRange> inequalities;
  std::vector<AffineRow> equalities;
  std::vector<std::string> inequality_paths;
  std::vector<std::string> equality_paths;
  std::vector<FixedVariable> fixed;
  std::vector<std::string> warnings;         // e.g. unused free variables
  bool all_fixed = false;

  std::size_t num_columns() const { return columns.size(); }
};

namespace detail {

struct Folder {
  const std::map<VarKey, int>& col;
  const std::map<VarKey, int>& fix;
  const std::vector<FixedVariable>& fixed;

  void fold(const Monomial& m, SparseRow& a, double& b, SparseRow& fixed_a) const {
    b = std::log(m.coefficient());
    for (const auto& [k, e] : m.exponents()) {
      if (auto it = col.find(k); it != col.end()) {
        a.emplace_back(it->second, e);
      } else {
        const int fi = fix.at(k);
        fixed_a.emplace_back(fi, e);
        b += e * std::log(fixed[static_cast<std::size_t>(fi)].value);
      }
    }
    std::sort(a.begin(), a.end());
    std::sort(fixed_a.begin(), fixed_a.end());
  }
};

}  // namespace detail

/// Compiles a flat model into log-space standard form. Columns are the free
/// variables in sorted key order; substituted values are folded into b.
inline GPProgram compile(const FlatModel& flat) {
  if (flat.objective.empty()) throw Error(ErrorCode::EmptyObjective, "model has no objective");
  GPProgram prog;

  // every key referenced anywhere
  std::map<VarKey, bool> used;
  auto note_keys = [&](const Posynomial& p) {
    for (const auto& t : p.terms())
      for (const auto& kv : t.exponents()) used[kv.first] = true;
  };
  note_keys(flat.objective);
  for (const auto& c : flat.constraints) note_keys(c.constraint.body);

  std::map<VarKey, int> col, fix;
  for (const auto& [k, v] : flat.fixed) {
    auto [base, idx] = split_element(k);
    fix[k] = static_cast<int>(prog.fixed.size());
    prog.fixed.push_back(FixedVariable{k, v, flat.variables.at(base).set_path});
  }
  for (const auto& [k, _] : used) {
    auto [base, idx] = split_element(k);
    if (!flat.variables.count(base)) throw Error(ErrorCode::UnknownVariable, "'" + k + "' is not declared");
    if (!fix.count(k)) {
      col[k] = static_cast<int>(prog.columns.size());
      prog.columns.push_back(k);
    }
  }
  for (const auto& [base, info] : flat.variables) {
    for (const auto& k : element_keys(info)) {
      if (!used.count(k) && !fix.count(k)) prog.warnings.push_back("UnusedVariable: '" + k + "' appears in no constraint");
    }
  }
  prog.all_fixed = prog.columns.empty();
  if (prog.all_fixed) prog.warnings.push_back("AllVariablesFixed: every variable is substituted; solve is a feasibility check");

  detail::Folder folder{col, fix, prog.fixed};
  auto add_terms = [&](const Posynomial& p) {
    TermRange r{prog.terms.size(), prog.terms.size()};
    for (const auto& m : p.terms()) {
      Term t;
      folder.fold(m, t.a, t.b, t.fixed_a);
      prog.terms.push_back(std::move(t));
    }
    r.end = prog.terms.size();
    return r;
  };
  prog.objective = add_terms(flat.objective);
  for (const auto& c : flat.constraints) {
    if (c.constraint.is_equality()) {
      AffineRow row;
      folder.fold(c.constraint.body.as_monomial(), row.a, row.b, row.fixed_a);
      prog.equalities.push_back(std::move(row));
      prog.equality_paths.push_back(c.path);
    } else {
      prog.inequalities.push_back(add_terms(c.constraint.body));
      prog.inequality_paths.push_back(c.path);
    }
  }
  return prog;
}

inline double dot(const SparseRow& a, std::span<const double> y) {
  double s = 0.0;
  for (const auto& [j, v] : a) s += v * y[static_cast<std::size_t>(j)];
  return s;
}

struct LseEval {
  double value = 0.0;
  std::vector<double> weights;  // softmax weights, one per term, summing to 1
};

/// log sum_t exp(a_t . y + b_t) over a term range, max-shifted so that
/// neither overflow nor underflow of the dominant term can occur.
inline LseEval eval_lse(const GPProgram& prog, TermRange range, std::span<const double> y) {
  LseEval r;
  r.weights.resize(range.size());
  if (range.size() == 0) {
    r.value = -std::numeric_limits<double>::infinity();
    return r;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < range.size(); ++t) {
    const Term& term = prog.terms[range.begin + t];
    r.weights[t] = dot(term.a, y) + term.b;
    mx = std::max(mx, r.weights[t]);
  }
  double s = 0.0;
  for (double& w : r.weights) {
    w = std::exp(w - mx);
    s += w;
  }
  r.value = mx + std::log(s);
  for (double& w : r.weights) w /= s;
  return r;
}

/// Constraint index i selects inequality i; i = -1 selects the objective.
inline LseEval eval_lse(const GPProgram& prog, int i, std::span<const double> y) {
  return eval_lse(prog, i < 0 ? prog.objective : prog.inequalities.at(static_cast<std::size_t>(i)), y);
}

/// Gradient of lse over a range: sum_t w_t a_t (dense, one entry per column).
inline std::vector<double> lse_gradient(const GPProgram& prog, TermRange range, const LseEval& e) {
  std::vector<double> g(prog.num_columns(), 0.0);
  for (std::size_t t = 0; t < range.size(); ++t) {
    for (const auto& [j, v] : prog.terms[range.begin + t].a) g[static_cast<std::size_t>(j)] += e.weights[t] * v;
  }
  return g;
}

/// Text dump of the standard form, one term per line:
/// "<constraint path> b=<b> a={col:exp, ...}".
inline void dump_standard_form(const GPProgram& prog, std::ostream& os) {
  auto row = [&](const std::string& path, const SparseRow& a, double b) {
    os << path << " b=" << format_number(b) << " a={";
    for (std::size_t i = 0; i < a.size(); ++i) {
      os << (i ? ", " : "") << prog.columns[static_cast<std::size_t>(a[i].first)] << ":" << format_number(a[i].second);
    }
    os << "}\n";
  };
  os << "# columns: " << prog.columns.size() << ", terms: " << prog.terms.size() << ", inequalities: "
     << prog.inequalities.size() << ", equalities: " << prog.equalities.size() << "\n";
  for (std::size_t t = prog.objective.begin; t < prog.objective.end; ++t) row("objective", prog.terms[t].a, prog.terms[t].b);
  for (std::size_t i = 0; i < prog.inequalities.size(); ++i) {
    for (std::size_t t = prog.inequalities[i].begin; t < prog.inequalities[i].end; ++t) {
      row(prog.inequality_paths[i], prog.terms[t].a, prog.terms[t].b);
    }
  }
  for (std::size_t j = 0; j < prog.equalities.size(); ++j) {
    row(prog.equality_paths[j] + " (=)", prog.equalities[j].a, prog.equalities[j].b);
  }
  for (const auto& w : prog.warnings) os << "# warning: " << w << "\n";
}

}  // namespace gpc
