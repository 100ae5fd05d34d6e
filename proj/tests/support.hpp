#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gpcentaur/gpcentaur.hpp"

#ifndef GPCENTAUR_DEMO_DIR
#define GPCENTAUR_DEMO_DIR "demos"
#endif

namespace gpc::testing {

inline std::string demo_path(const std::string& name) { return std::string(GPCENTAUR_DEMO_DIR) + "/" + name; }

inline Analysis solve_text(const std::string& text, const Overlay& ov = {}, const SolverOptions& opts = {}) {
  return analyze(load_model(text), ov, opts);
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// ---------------------------------------------------------------------------
// Grid-search oracle over a log-space box, with zoom refinement. The
// function returns +inf for infeasible points.
// ---------------------------------------------------------------------------

struct GridResult {
  std::vector<double> x;  // best point, original (positive) domain
  double value = std::numeric_limits<double>::infinity();
};

inline GridResult grid_search(const std::function<double(std::span<const double>)>& f, int dims, double lo, double hi,
                              int points = 200, int zooms = 6) {
  std::vector<double> blo(static_cast<std::size_t>(dims), lo), bhi(static_cast<std::size_t>(dims), hi);
  GridResult best;
  std::vector<double> logc(static_cast<std::size_t>(dims)), x(static_cast<std::size_t>(dims));
  for (int round = 0; round <= zooms; ++round) {
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    std::vector<double> best_log = logc;
    double round_best = best.value;
    for (;;) {
      for (int d = 0; d < dims; ++d) {
        const auto u = static_cast<std::size_t>(d);
        const double l = blo[u] + (bhi[u] - blo[u]) * idx[u] / (points - 1);
        logc[u] = l;
        x[u] = std::exp(l);
      }
      const double v = f(x);
      if (v < round_best) {
        round_best = v;
        best_log = logc;
        best.value = v;
        best.x = x;
      }
      int d = 0;
      while (d < dims && ++idx[static_cast<std::size_t>(d)] == points) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == dims) break;
    }
    if (!std::isfinite(best.value)) break;
    for (int d = 0; d < dims; ++d) {
      const auto u = static_cast<std::size_t>(d);
      const double step = (bhi[u] - blo[u]) / (points - 1);
      blo[u] = best_log[u] - 3 * step;
      bhi[u] = best_log[u] + 3 * step;
    }
    if (round == 0) points = std::min(points, dims >= 3 ? 41 : 101);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Analytic catalog. Expected values come from the KKT conditions worked by
// hand; the oracle is an independent evaluation of the same problem used by
// the grid search.
// ---------------------------------------------------------------------------

struct CatalogModel {
  std::string name;
  std::string text;
  double p_star;                               // objective in the written sense
  std::map<std::string, double> lambda;        // constraint path -> S
  std::map<std::string, double> var_sens;      // fixed key -> S
  int dims;                                    // oracle dimension
  std::function<double(std::span<const double>)> oracle;  // objective, +inf when infeasible
};

inline double inf() { return std::numeric_limits<double>::infinity(); }

inline std::vector<CatalogModel> catalog() {
  std::vector<CatalogModel> c;
  c.push_back({"reciprocal_bound",
               "model M\n var x\n objective minimize x\n constraint 1/x <= 1 ; label=c\nend\n",
               1.0, {{"M:c", 1.0}}, {}, 1,
               [](std::span<const double> v) { return 1 / v[0] <= 1 ? v[0] : inf(); }});
  c.push_back({"product_floor",
               "model M\n var x\n var y\n objective minimize x + y\n constraint x*y >= 1 ; label=c\nend\n",
               2.0, {{"M:c", 0.5}}, {}, 2,
               [](std::span<const double> v) { return v[0] * v[1] >= 1 ? v[0] + v[1] : inf(); }});
  c.push_back({"box_reciprocal",
               "model M\n var x\n var y\n objective minimize 1/(x*y)\n constraint x <= 2 ; label=cx\n"
               " constraint y <= 3 ; label=cy\nend\n",
               1.0 / 6.0, {{"M:cx", 1.0}, {"M:cy", 1.0}}, {}, 2,
               [](std::span<const double> v) { return v[0] <= 2 && v[1] <= 3 ? 1 / (v[0] * v[1]) : inf(); }});
  c.push_back({"fixed_cover",
               "model M\n var x\n var a ; value=4\n objective minimize x\n constraint a/x <= 1 ; label=c\nend\n",
               4.0, {{"M:c", 1.0}}, {{"M.a", 1.0}}, 1,
               [](std::span<const double> v) { return 4 / v[0] <= 1 ? v[0] : inf(); }});
  c.push_back({"fixed_square",
               "model M\n var x\n var a ; value=2\n objective minimize x\n constraint a^2/x <= 1 ; label=c\nend\n",
               4.0, {{"M:c", 1.0}}, {{"M.a", 2.0}}, 1,
               [](std::span<const double> v) { return 4 / v[0] <= 1 ? v[0] : inf(); }});
  c.push_back({"tradeoff",
               "model M\n var x\n var a ; value=4\n objective minimize x + a/x\nend\n",
               4.0, {}, {{"M.a", 0.5}}, 1,
               [](std::span<const double> v) { return v[0] + 4 / v[0]; }});
  c.push_back({"sum_squares",
               "model M\n var x\n var y\n objective minimize x^2 + y^2\n constraint x*y >= 4 ; label=c\nend\n",
               8.0, {{"M:c", 1.0}}, {}, 2,
               [](std::span<const double> v) { return v[0] * v[1] >= 4 ? v[0] * v[0] + v[1] * v[1] : inf(); }});
  c.push_back({"equality_link",
               "model M\n var x\n var y\n objective minimize x + y\n constraint x = 2*y ; label=link\n"
               " constraint y >= 1 ; label=floor\nend\n",
               3.0, {{"M:link", -2.0 / 3.0}, {"M:floor", 1.0}}, {}, 1,
               // parameterized by y, x = 2y
               [](std::span<const double> v) { return v[0] >= 1 ? 3 * v[0] : inf(); }});
  c.push_back({"maximize_area",
               "model M\n var x\n var y\n objective maximize x*y\n constraint x + 2*y <= 4 ; label=budget\nend\n",
               2.0, {{"M:budget", 2.0}}, {}, 2,
               [](std::span<const double> v) { return v[0] + 2 * v[1] <= 4 ? -v[0] * v[1] : inf(); }});
  c.push_back({"slack_cap",
               "model M\n var x\n var y\n objective minimize x + y\n constraint x*y >= 1 ; label=c\n"
               " constraint x <= 1e6 ; label=cap\nend\n",
               2.0, {{"M:c", 0.5}, {"M:cap", 0.0}}, {}, 2,
               [](std::span<const double> v) { return v[0] * v[1] >= 1 && v[0] <= 1e6 ? v[0] + v[1] : inf(); }});
  return c;
}

// ---------------------------------------------------------------------------
// Finite differences of log p* (p* always the minimized objective).
// ---------------------------------------------------------------------------

/// Relaxes constraint `path` to body <= e^u (lhs/rhs = e^u for equalities)
/// directly in the compiled program and re-solves.
inline double log_p_with_shift(const GPProgram& base, const std::string& path, double u, const SolverOptions& opts = {}) {
  GPProgram p = base;
  bool found = false;
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    if (p.inequality_paths[i] != path) continue;
    for (std::size_t t = p.inequalities[i].begin; t < p.inequalities[i].end; ++t) p.terms[t].b -= u;
    found = true;
  }
  for (std::size_t j = 0; j < p.equalities.size(); ++j) {
    if (p.equality_paths[j] != path) continue;
    p.equalities[j].b -= u;
    found = true;
  }
  if (!found) throw std::runtime_error("no constraint " + path);
  const RawSolution r = solve(p, opts);
  if (r.status != SolveStatus::Optimal) return std::numeric_limits<double>::quiet_NaN();
  return r.log_objective;
}

/// Central difference estimate of S_i = -d log p* / du.
inline double fd_constraint(const GPProgram& prog, const std::string& path, double h = 1e-4) {
  return -(log_p_with_shift(prog, path, h) - log_p_with_shift(prog, path, -h)) / (2 * h);
}

/// Central difference estimate of S_k = d log p* / d log value, by
/// re-substituting the value times e^(+-h).
inline double fd_variable(const LoadedModel& lm, const Overlay& base, const Analysis& a, const VarKey& key, double h = 1e-4) {
  const double v = a.flat.fixed.at(key);
  auto logp = [&](double s) {
    Overlay ov = base;
    ov.apply_set(key, {v * std::exp(s)});
    const Analysis r = analyze(lm, ov);
    return r.raw.log_objective;
  };
  return (logp(h) - logp(-h)) / (2 * h);
}

// ---------------------------------------------------------------------------
// Random small GPs for the brute-force oracle. Objective is coercive in every
// variable; every constraint holds strictly at x = 1 so the box [e^-3, e^3]
// contains feasible points and the optimum.
// ---------------------------------------------------------------------------

struct RandomGP {
  int n = 0;
  // objective terms and constraint terms: coefficient + exponents
  struct Term {
    double c;
    std::vector<double> a;
  };
  std::vector<Term> objective;
  std::vector<std::vector<Term>> constraints;

  double eval(const std::vector<Term>& ts, std::span<const double> x) const {
    double s = 0;
    for (const auto& t : ts) {
      double m = t.c;
      for (int j = 0; j < n; ++j) m *= std::pow(x[static_cast<std::size_t>(j)], t.a[static_cast<std::size_t>(j)]);
      s += m;
    }
    return s;
  }
  double oracle(std::span<const double> x) const {
    for (const auto& c : constraints) {
      if (eval(c, x) > 1.0) return inf();
    }
    return eval(objective, x);
  }

  std::string to_gpm() const {
    auto term_text = [&](const Term& t) {
      std::string s = format_number(t.c);
      for (int j = 0; j < n; ++j) {
        const double e = t.a[static_cast<std::size_t>(j)];
        if (e != 0) s += "*x" + std::to_string(j) + "^(" + format_number(e) + ")";
      }
      return s;
    };
    std::string out = "model R\n";
    for (int j = 0; j < n; ++j) out += "  var x" + std::to_string(j) + "\n";
    std::string obj;
    for (const auto& t : objective) obj += (obj.empty() ? "" : " + ") + term_text(t);
    out += "  objective minimize " + obj + "\n";
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      std::string body;
      for (const auto& t : constraints[i]) body += (body.empty() ? "" : " + ") + term_text(t);
      out += "  constraint " + body + " <= 1 ; label=c" + std::to_string(i) + "\n";
    }
    return out + "end\n";
  }
};

inline RandomGP random_gp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(0.5, 2.0), pull(20.0, 80.0), expo(-1.0, 1.0), share(0.1, 0.45);
  std::uniform_int_distribution<int> nvar(2, 3), ncons(2, 5), nterms(1, 2);
  RandomGP g;
  g.n = nvar(rng);
  auto quantize = [](double e) { return std::round(e * 4) / 4; };
  for (int j = 0; j < g.n; ++j) {
    std::vector<double> up(static_cast<std::size_t>(g.n), 0.0), down(static_cast<std::size_t>(g.n), 0.0);
    up[static_cast<std::size_t>(j)] = 1;
    down[static_cast<std::size_t>(j)] = -1;
    g.objective.push_back({coef(rng), up});
    g.objective.push_back({coef(rng) * pull(rng), down});  // unconstrained optimum far from x = 1
  }
  const int m = ncons(rng);
  for (int i = 0; i < m; ++i) {
    std::vector<RandomGP::Term> ts;
    const int k = nterms(rng);
    for (int t = 0; t < k; ++t) {
      std::vector<double> a(static_cast<std::size_t>(g.n));
      for (auto& e : a) e = quantize(expo(rng));
      if (t == 0) a[static_cast<std::size_t>(i % g.n)] = 1;  // grows with a variable the objective pulls up
      ts.push_back({share(rng), a});  // sum of coefficients < 1: strictly feasible at x = 1
    }
    g.constraints.push_back(ts);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Synthetic hierarchical model for the scale check.
// ---------------------------------------------------------------------------

inline ModelDocument scale_document(int blocks = 100, int vars_per_block = 10) {
  ModelDocument root;
  root.name = "Fleet";
  std::string obj;
  for (int b = 0; b < blocks; ++b) {
    ModelDocument blk;
    blk.name = "B" + std::to_string(b);
    for (int j = 0; j < vars_per_block; ++j) {
      blk.vars.push_back(VarDoc{"x" + std::to_string(j), std::nullopt, "", {}, "", ""});
      obj += (obj.empty() ? "" : " + ") + blk.name + ".x" + std::to_string(j);
    }
    for (int j = 0; j < vars_per_block; ++j) {
      const int k = (j + 1) % vars_per_block;
      const double c = 0.5 + 0.05 * ((b * 7 + j * 3) % 11);
      blk.constraints.push_back({"x" + std::to_string(j) + " >= " + format_number(c) + " + 0.1/x" + std::to_string(k), "", "", ""});
    }
    for (int j = 0; j + 1 < vars_per_block; j += 2) {
      const double c = 1.1 + 0.02 * ((b + j) % 13);
      blk.constraints.push_back({"x" + std::to_string(j) + "*x" + std::to_string(j + 1) + " >= " + format_number(c), "", "", ""});
    }
    if (b > 0) {
      // couple neighbouring blocks
      blk.constraints.push_back({"x0*B" + std::to_string(b - 1) + ".x1 >= 1.3", "couple", "", ""});
    }
    root.submodels.push_back(std::move(blk));
  }
  root.objective = ObjectiveDoc{Sense::Minimize, obj};
  return root;
}

// ---------------------------------------------------------------------------
// Parser corpus
// ---------------------------------------------------------------------------

/// Scope fixture for expression lowering: scalars x, y, z, a vector v[3] and
/// a length L in centimetres.
struct ExprFixture {
  ConstraintSet set{"P"};
  VariableTable table;
  ExprFixture() {
    set.declare("x");
    set.declare("y");
    set.declare("z");
    set.declare("v", 3);
    set.declare("L", std::nullopt, "cm");
    table = variable_table(set);
  }
  Scope scope() const { return Scope{&table, "P", true}; }
  Monomial X() const { return set.var("x"); }
  Monomial Y() const { return set.var("y"); }
  Monomial Z() const { return set.var("z"); }
};

struct ExprCase {
  std::string src;
  std::function<Posynomial(const ExprFixture&)> expected;
};

inline std::vector<ExprCase> expression_corpus() {
  using F = const ExprFixture&;
  return {
      {"x", [](F f) { return Posynomial(f.X()); }},
      {"2*x", [](F f) { return Posynomial(Monomial(2.0) * f.X()); }},
      {"x*y", [](F f) { return Posynomial(f.X() * f.Y()); }},
      {"x/y", [](F f) { return Posynomial(f.X() / f.Y()); }},
      {"x^2", [](F f) { return Posynomial(mono_pow(f.X(), 2)); }},
      {"x^-0.5", [](F f) { return Posynomial(mono_pow(f.X(), -0.5)); }},
      {"x^(-0.25)*y", [](F f) { return Posynomial(mono_pow(f.X(), -0.25) * f.Y()); }},
      {"x + y", [](F f) { return posy_add(f.X(), f.Y()); }},
      {"(x + y)^2", [](F f) { return posy_pow(posy_add(f.X(), f.Y()), 2); }},
      {"x*(y + z)", [](F f) { return posy_mul(f.X(), posy_add(f.Y(), f.Z())); }},
      {"(x + y)/z", [](F f) { return posy_div(posy_add(f.X(), f.Y()), f.Z()); }},
      {"v[1]*x", [](F f) { return Posynomial(f.set.element("v", 1) * f.X()); }},
      {"3", [](F) { return Posynomial(Monomial(3.0)); }},
      {"1.5e-3*x*y^2 + x + x", [](F f) {
         return posy_add(Monomial(1.5e-3) * f.X() * mono_pow(f.Y(), 2), Monomial(2.0) * f.X());
       }},
      {"L^2/x", [](F f) { return Posynomial(mono_pow(f.set.var("L"), 2) / f.X()); }},
  };
}

inline std::vector<std::string> document_corpus() {
  std::vector<std::string> docs;
  for (const char* name : {"toy.gpm", "coupled.gpm", "infeasible.gpm", "airplane.gpm", "reynolds_vector.gpm",
                           "reynolds_scalar.gpm"}) {
    docs.push_back(read_file(demo_path(name)));
  }
  for (const auto& m : catalog()) docs.push_back(m.text);
  docs.push_back("model Deep ; owner=\"systems\" ; note=\"three levels\"\n"
                 "  objective minimize A.B.C.q + A.r\n"
                 "  model A ; owner=\"alpha team\"\n"
                 "    var r ; units=kg\n"
                 "    var m0 ; units=kg ; value=2\n"
                 "    constraint r >= m0 ; label=floor\n"
                 "    model B\n"
                 "      model C ; note=\"innermost \\\"quoted\\\" note\"\n"
                 "        var q ; units=kg ; owner=\"gamma\"\n"
                 "        constraint q*r >= m0^2 ; label=link\n"
                 "      end\n"
                 "    end\n"
                 "  end\n"
                 "end\n");
  docs.push_back("model Vec\n  var x[3] ; units=m\n  var w[3] ; units=m ; value=1,2,3\n  objective minimize x\n"
                 "  constraint x >= w ; label=floor\nend\n");
  docs.push_back("model Max\n  var x\n  var y ; units=m/s^2\n  objective maximize x\n"
                 "  var g0 ; units=m/s^2 ; value=9.8\n"
                 "  constraint x <= 2 ; label=cap ; owner=\"ops\" ; note=\"hard cap\"\n  constraint y >= g0\nend\n");
  docs.push_back("model Empty\nend\n");
  return docs;
}

}  // namespace gpc::testing
