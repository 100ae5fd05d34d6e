#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gpcentaur/compile.hpp"
#include "gpcentaur/error.hpp"

namespace gpc {

struct SolverOptions {
  double mu = 10.0;           // barrier multiplier per outer iteration
  double t0 = 1.0;
  double gap_tol = 1e-8;      // stop when m/t < gap_tol
  double newton_tol = 1e-10;  // stop centering when decrement^2/2 <= newton_tol
  int max_outer = 100;
  int max_newton = 200;
  double alpha = 0.25;        // Armijo fraction
  double beta = 0.5;          // backtracking factor
  std::ostream* trace = nullptr;

  void validate() const {
    if (!(mu > 1.0)) throw Error(ErrorCode::InvalidArgument, "mu must be > 1");
    if (!(t0 > 0.0) || !(gap_tol > 0.0) || !(newton_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "t0 and tolerances must be > 0");
    if (!(alpha > 0.0 && alpha < 0.5)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 0.5)");
    if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in (0, 1)");
    if (max_outer < 1 || max_newton < 1) throw Error(ErrorCode::InvalidArgument, "iteration limits must be >= 1");
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

/// Primal optimum in log space plus the dual solution.
struct RawSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  std::vector<double> y;        // log of the free variables, column order
  double log_objective = 0.0;   // lse_0(y*)
  double objective = 0.0;       // exp(lse_0(y*))
  std::vector<double> lambda;   // inequality multipliers, >= 0
  std::vector<double> nu;       // equality multipliers, signed
  double gap = 0.0;             // m / t at termination
  double t = 0.0;
  int outer_iterations = 0;
  int newton_iterations = 0;
  int phase1_iterations = 0;
  std::vector<std::string> diagnosis;  // infeasibility: conflicting constraint paths
  std::string message;
};

struct Phase1Result {
  bool feasible = false;
  std::vector<double> y0;
  double s = 0.0;                      // attained max constraint value
  std::vector<std::string> diagnosis;  // most violated constraints when infeasible
  int iterations = 0;
  std::string message;
};

namespace detail {

inline constexpr double kUnboundedLog = -300.0;
inline constexpr double kConstantTol = 1e-9;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Equality rows with at least one free column, as a dense matrix.
struct EqualitySystem {
  MatrixXd E;                // p x n
  VectorXd b;                // E y + b = 0
  std::vector<int> rows;     // index into prog.equalities
  MatrixXd EtE;
};

inline EqualitySystem equality_system(const GPProgram& prog) {
  EqualitySystem es;
  const auto n = static_cast<Eigen::Index>(prog.num_columns());
  for (std::size_t j = 0; j < prog.equalities.size(); ++j) {
    if (!prog.equalities[j].a.empty()) es.rows.push_back(static_cast<int>(j));
  }
  const auto p = static_cast<Eigen::Index>(es.rows.size());
  es.E = MatrixXd::Zero(p, n);
  es.b = VectorXd::Zero(p);
  for (Eigen::Index r = 0; r < p; ++r) {
    const auto& row = prog.equalities[static_cast<std::size_t>(es.rows[static_cast<std::size_t>(r)])];
    for (const auto& [c, v] : row.a) es.E(r, c) = v;
    es.b(r) = row.b;
  }
  es.EtE = es.E.transpose() * es.E;
  return es;
}

/// Barrier objective for phase 1 (z = [y; s], minimize t*s - sum log(s - f_i))
/// or phase 2 (z = y, minimize t*f_0 - sum log(-f_i)).
class Barrier {
 public:
  Barrier(const GPProgram& prog, std::vector<int> ineq, bool phase1)
      : prog_(prog), ineq_(std::move(ineq)), phase1_(phase1), n_(static_cast<Eigen::Index>(prog.num_columns())),
        pos_(prog.num_columns(), -1) {}

  Eigen::Index dim() const { return phase1_ ? n_ + 1 : n_; }
  std::span<const double> y_of(const VectorXd& z) const { return {z.data(), static_cast<std::size_t>(n_)}; }

  double value(const VectorXd& z, double t) const {
    const auto y = y_of(z);
    const double s = phase1_ ? z(n_) : 0.0;
    double v = phase1_ ? t * s : t * eval_lse(prog_, prog_.objective, y).value;
    for (int i : ineq_) {
      const double f = eval_lse(prog_, prog_.inequalities[static_cast<std::size_t>(i)], y).value;
      const double slack = phase1_ ? s - f : -f;
      if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
      v -= std::log(slack);
    }
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  }

  void derivatives(const VectorXd& z, double t, VectorXd& g, MatrixXd& H) {
    const auto y = y_of(z);
    g = VectorXd::Zero(dim());
    H = MatrixXd::Zero(dim(), dim());
    if (phase1_) {
      g(n_) += t;
    } else {
      add_function(prog_.objective, y, t, 0.0, 0.0, g, H);
    }
    for (int i : ineq_) {
      const TermRange& r = prog_.inequalities[static_cast<std::size_t>(i)];
      const double f = eval_lse(prog_, r, y).value;
      const double d = phase1_ ? z(n_) - f : -f;
      add_function(r, y, 1.0 / d, 1.0 / (d * d), phase1_ ? 1.0 / d : 0.0, g, H);
    }
  }

  /// Constraint values f_i(y) for the active inequalities.
  std::vector<double> constraint_values(const VectorXd& z) const {
    std::vector<double> out;
    for (int i : ineq_) out.push_back(eval_lse(prog_, prog_.inequalities[static_cast<std::size_t>(i)], y_of(z)).value);
    return out;
  }

 private:
  // Adds coef * grad f to g and coef * hess f + rank1 * grad f grad f^T to H.
  // In phase 1 the slack coupling terms for -log(s - f) are added too
  // (slack_coef = 1/d, giving d/ds = -1/d, d2/ds2 = 1/d^2, d2/dyds = -grad f/d^2).
  void add_function(const TermRange& r, std::span<const double> y, double coef, double rank1, double slack_coef,
                    VectorXd& g, MatrixXd& H) {
    const LseEval e = eval_lse(prog_, r, y);
    support_.clear();
    for (std::size_t t = r.begin; t < r.end; ++t) {
      for (const auto& [j, v] : prog_.terms[t].a) {
        if (pos_[static_cast<std::size_t>(j)] < 0) {
          pos_[static_cast<std::size_t>(j)] = static_cast<int>(support_.size());
          support_.push_back(j);
        }
      }
    }
    gf_.assign(support_.size(), 0.0);
    for (std::size_t t = r.begin; t < r.end; ++t) {
      const double w = e.weights[t - r.begin];
      const auto& a = prog_.terms[t].a;
      for (const auto& [j, v] : a) gf_[static_cast<std::size_t>(pos_[static_cast<std::size_t>(j)])] += w * v;
      const double cw = coef * w;
      for (const auto& [j, v] : a) {
        for (const auto& [k, u] : a) H(j, k) += cw * v * u;
      }
    }
    const double outer = rank1 - coef;
    for (std::size_t p = 0; p < support_.size(); ++p) {
      const int j = support_[p];
      g(j) += coef * gf_[p];
      for (std::size_t q = 0; q < support_.size(); ++q) H(j, support_[q]) += outer * gf_[p] * gf_[q];
    }
    if (phase1_ && slack_coef != 0.0) {
      g(n_) -= slack_coef;
      H(n_, n_) += rank1;
      for (std::size_t p = 0; p < support_.size(); ++p) {
        const int j = support_[p];
        H(j, n_) -= rank1 * gf_[p];
        H(n_, j) -= rank1 * gf_[p];
      }
    }
    for (int j : support_) pos_[static_cast<std::size_t>(j)] = -1;
  }

  const GPProgram& prog_;
  std::vector<int> ineq_;
  bool phase1_;
  Eigen::Index n_;
  std::vector<int> pos_;
  std::vector<int> support_;
  std::vector<double> gf_;
};

/// Solves [H E^T; E 0][dz; w] = [-g; -r], where r is the equality residual
/// at the current point so that rounding drift is pulled back each step. H is
/// augmented with rho E^T E (balanced on the right side by rho E^T r) and, on
/// factorization failure, a diagonal shift escalating from 1e-12 to 1e-6
/// relative to the largest diagonal entry.
inline bool solve_kkt(MatrixXd H, VectorXd g, const MatrixXd& E, const MatrixXd& EtE, const VectorXd& r,
                      VectorXd& dz, VectorXd& w) {
  const Eigen::Index n = H.rows();
  const Eigen::Index p = E.rows();
  const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  if (p > 0) {
    H.topLeftCorner(EtE.rows(), EtE.cols()) += scale * EtE;
    g.head(E.cols()) += scale * (E.transpose() * r);
  }
  Eigen::LLT<MatrixXd> llt(H);
  for (double shift = 1e-12; llt.info() != Eigen::Success; shift *= 10.0) {
    if (shift > 1e-6 * 1.01) return false;
    MatrixXd Hs = H;
    Hs.diagonal().array() += shift * scale;
    llt.compute(Hs);
  }
  const VectorXd u = llt.solve(g);
  if (p == 0) {
    dz = -u;
    w.resize(0);
    return dz.allFinite();
  }
  MatrixXd Ez = MatrixXd::Zero(p, n);
  Ez.leftCols(E.cols()) = E;
  const MatrixXd X = llt.solve(Ez.transpose());  // n x p
  MatrixXd S = Ez * X;
  const double sscale = std::max(1e-300, S.diagonal().cwiseAbs().maxCoeff());
  Eigen::LLT<MatrixXd> sllt(S);
  for (double d = 1e-12; sllt.info() != Eigen::Success; d *= 10.0) {
    if (d > 1e-6 * 1.01) return false;
    MatrixXd Sd = S;
    Sd.diagonal().array() += d * sscale;
    sllt.compute(Sd);
  }
  w = sllt.solve(r - Ez * u);
  dz = -(u + X * w);
  return dz.allFinite() && w.allFinite();
}

struct CenterResult {
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;
  VectorXd w;  // equality multipliers from the last KKT solve, scaled by t
  std::string message;
};

/// Equality-constrained Newton centering with backtracking restricted to
/// the barrier domain. `stop` is checked after every accepted step.
template <class StopFn>
CenterResult center(Barrier& bar, VectorXd& z, double t, const EqualitySystem& es, const SolverOptions& opt,
                    StopFn&& stop) {
  CenterResult res;
  VectorXd g, dz, w;
  auto residual = [&](const VectorXd& v) -> VectorXd {
    return es.E.rows() > 0 ? VectorXd(es.E * v + es.b) : VectorXd();
  };
  MatrixXd H;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < opt.max_newton; ++it) {
    bar.derivatives(z, t, g, H);
    if (!solve_kkt(H, g, es.E, es.EtE, residual(z), dz, w)) {
      res.status = SolveStatus::NumericalFailure;
      res.message = "KKT factorization failed after maximum regularization";
      return res;
    }
    res.w = w;
    const double dec2 = -g.dot(dz);
    if (dec2 / 2.0 <= opt.newton_tol) return res;
    const double phi = bar.value(z, t);
    double step = 1.0;
    VectorXd trial = z + dz;
    double phi_new = bar.value(trial, t);
    int backtracks = 0;
    const double slack = 64.0 * eps * (std::abs(phi) + 1.0);
    while (!(phi_new <= phi + opt.alpha * step * g.dot(dz) + slack)) {
      step *= opt.beta;
      if (++backtracks > 100 || step < 1e-30) {
        if (dec2 / 2.0 <= 1e-6) return res;  // at the round-off floor of phi
        res.status = SolveStatus::NumericalFailure;
        res.message = "line search could not find descent";
        return res;
      }
      trial = z + step * dz;
      phi_new = bar.value(trial, t);
    }
    z = trial;
    ++res.iterations;
    if (stop(z)) return res;
  }
  // Hitting the cap with a small decrement is still a usable center.
  bar.derivatives(z, t, g, H);
  if (solve_kkt(H, g, es.E, es.EtE, residual(z), dz, w) && -g.dot(dz) / 2.0 <= 1e-6) {
    res.w = w;
    return res;
  }
  res.status = SolveStatus::NumericalFailure;
  res.message = "centering exceeded the Newton iteration limit";
  return res;
}

/// Partition of inequalities into those with free columns and constant ones.
inline std::vector<int> varying_inequalities(const GPProgram& prog, std::vector<int>& constant) {
  std::vector<int> varying;
  for (std::size_t i = 0; i < prog.inequalities.size(); ++i) {
    bool any = false;
    const auto& r = prog.inequalities[i];
    for (std::size_t t = r.begin; t < r.end && !any; ++t) any = !prog.terms[t].a.empty();
    (any ? varying : constant).push_back(static_cast<int>(i));
  }
  return varying;
}

inline double constant_lse(const GPProgram& prog, const TermRange& r) {
  const std::vector<double> none;
  return eval_lse(prog, r, std::span<const double>(none.data(), 0)).value;
}

}  // namespace detail

/// Finds a strictly feasible point by minimizing s subject to f_i(y) <= s,
/// starting from the minimum-norm solution of the equality rows.
inline Phase1Result phase1(const GPProgram& prog, const SolverOptions& opt = {}) {
  using namespace detail;
  opt.validate();
  Phase1Result res;
  const auto n = static_cast<Eigen::Index>(prog.num_columns());

  std::vector<int> constant;
  const std::vector<int> ineq = varying_inequalities(prog, constant);
  for (int i : constant) {
    const double f = constant_lse(prog, prog.inequalities[static_cast<std::size_t>(i)]);
    if (f > kConstantTol) res.diagnosis.push_back(prog.inequality_paths[static_cast<std::size_t>(i)]);
    res.s = std::max(res.s, f);
  }
  for (std::size_t j = 0; j < prog.equalities.size(); ++j) {
    if (prog.equalities[j].a.empty() && std::abs(prog.equalities[j].b) > kConstantTol) {
      res.diagnosis.push_back(prog.equality_paths[j]);
      res.s = std::max(res.s, std::abs(prog.equalities[j].b));
    }
  }
  if (!res.diagnosis.empty()) {
    res.message = "constraints with only substituted variables are violated";
    return res;
  }

  const EqualitySystem es = equality_system(prog);
  VectorXd y0 = VectorXd::Zero(n);
  if (es.E.rows() > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(es.E);
    y0 = cod.solve(-es.b);
    const VectorXd resid = es.E * y0 + es.b;
    if (resid.cwiseAbs().maxCoeff() > 1e-8 * (1.0 + es.b.cwiseAbs().maxCoeff())) {
      for (Eigen::Index r = 0; r < resid.size(); ++r) {
        if (std::abs(resid(r)) > 1e-8) res.diagnosis.push_back(prog.equality_paths[static_cast<std::size_t>(es.rows[static_cast<std::size_t>(r)])]);
      }
      res.s = resid.cwiseAbs().maxCoeff();
      res.message = "equality constraints are inconsistent";
      return res;
    }
  }
  res.y0.assign(y0.data(), y0.data() + n);
  if (ineq.empty()) {
    res.feasible = true;
    res.s = -std::numeric_limits<double>::infinity();
    return res;
  }

  Barrier bar(prog, ineq, true);
  VectorXd z(n + 1);
  z.head(n) = y0;
  double smax = -std::numeric_limits<double>::infinity();
  for (double f : bar.constraint_values(z)) smax = std::max(smax, f);
  if (smax < -0.1) {  // already comfortably interior
    res.feasible = true;
    res.s = smax;
    return res;
  }
  z(n) = smax + 1.0;
  EqualitySystem es1 = es;
  es1.E.conservativeResize(es.E.rows(), n + 1);
  if (es.E.rows() > 0) es1.E.col(n).setZero();
  es1.EtE = es1.E.transpose() * es1.E;

  constexpr double kMargin = 0.1;
  const auto m = static_cast<double>(ineq.size());
  double t = opt.t0;
  bool reached = false;
  auto stop = [&](const VectorXd& zz) { return zz(n) < -kMargin; };
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    CenterResult c = center(bar, z, t, es1, opt, stop);
    res.iterations += c.iterations;
    if (c.status != SolveStatus::Optimal) {
      res.message = "phase 1: " + c.message;
      break;
    }
    if (z(n) < -kMargin) {
      reached = true;
      break;
    }
    if (m / t < opt.gap_tol) break;
    t *= opt.mu;
  }
  // Report the true max constraint value at the final point.
  res.s = -std::numeric_limits<double>::infinity();
  const std::vector<double> fv = bar.constraint_values(z);
  for (double f : fv) res.s = std::max(res.s, f);
  res.y0.assign(z.data(), z.data() + n);
  res.feasible = reached || res.s < -1e-9;
  if (!res.feasible) {
    // phase-1 duals 1/(t (s - f_i)) sum to ~1; report the significant ones
    std::vector<std::pair<double, int>> ranked;
    for (std::size_t k = 0; k < ineq.size(); ++k) {
      const double d = z(n) - fv[k];
      ranked.emplace_back(1.0 / (t * std::max(d, 1e-300)), ineq[k]);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (const auto& [lam, i] : ranked) {
      if (lam < 1e-3 * ranked.front().first) break;
      res.diagnosis.push_back(prog.inequality_paths[static_cast<std::size_t>(i)]);
    }
    if (res.message.empty()) res.message = "no point satisfies all constraints (max violation in log space " +
                                            format_number(res.s) + ")";
  }
  return res;
}

/// Barrier interior-point solve of the log-space program.
inline RawSolution solve(const GPProgram& prog, const SolverOptions& opt = {}) {
  using namespace detail;
  opt.validate();
  RawSolution sol;
  const auto n = static_cast<Eigen::Index>(prog.num_columns());
  sol.lambda.assign(prog.inequalities.size(), 0.0);
  sol.nu.assign(prog.equalities.size(), 0.0);

  Phase1Result p1 = phase1(prog, opt);
  sol.phase1_iterations = p1.iterations;
  if (!p1.feasible) {
    sol.status = p1.message.rfind("phase 1: ", 0) == 0 ? SolveStatus::NumericalFailure : SolveStatus::Infeasible;
    sol.diagnosis = p1.diagnosis;
    sol.message = p1.message;
    sol.y = p1.y0;
    return sol;
  }

  if (n == 0) {  // everything substituted: a feasibility check only
    sol.status = SolveStatus::Optimal;
    sol.log_objective = constant_lse(prog, prog.objective);
    sol.objective = std::exp(sol.log_objective);
    return sol;
  }

  std::vector<int> constant;
  const std::vector<int> ineq = varying_inequalities(prog, constant);
  const EqualitySystem es = equality_system(prog);
  Barrier bar(prog, ineq, false);
  VectorXd y = Eigen::Map<const VectorXd>(p1.y0.data(), n);

  auto objective_at = [&](const VectorXd& v) { return eval_lse(prog, prog.objective, bar.y_of(v)).value; };
  bool unbounded = false;
  auto stop = [&](const VectorXd& v) {
    if (objective_at(v) < kUnboundedLog) unbounded = true;
    return unbounded;
  };

  const auto m = static_cast<double>(ineq.size());
  double t = m > 0 ? opt.t0 : 1.0;
  VectorXd w;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    CenterResult c = center(bar, y, t, es, opt, stop);
    sol.newton_iterations += c.iterations;
    ++sol.outer_iterations;
    w = c.w;
    if (opt.trace) {
      *opt.trace << "[gp-solver] outer " << outer << " t=" << std::setprecision(6) << t << " newton=" << c.iterations
                 << " gap=" << (m / t) << " f0=" << objective_at(y) << "\n";
    }
    if (unbounded) {
      sol.status = SolveStatus::Unbounded;
      sol.message = "objective fell below exp(-300); treated as unbounded";
      break;
    }
    if (c.status != SolveStatus::Optimal) {
      sol.status = c.status;
      sol.message = c.message;
      break;
    }
    if (m == 0.0 || m / t < opt.gap_tol) {
      sol.status = SolveStatus::Optimal;
      break;
    }
    t *= opt.mu;
  }
  if (sol.status == SolveStatus::NumericalFailure && sol.message.empty()) {
    sol.message = "outer iteration limit reached";
  }
  sol.y.assign(y.data(), y.data() + n);
  sol.t = t;
  sol.gap = m / t;
  sol.log_objective = objective_at(y);
  sol.objective = std::exp(sol.log_objective);
  if (sol.status != SolveStatus::Optimal) return sol;

  const std::vector<double> fv = bar.constraint_values(y);
  for (std::size_t k = 0; k < ineq.size(); ++k) {
    sol.lambda[static_cast<std::size_t>(ineq[k])] = 1.0 / (t * (-fv[k]));
  }
  for (Eigen::Index r = 0; r < w.size(); ++r) {
    sol.nu[static_cast<std::size_t>(es.rows[static_cast<std::size_t>(r)])] = w(r) / t;
  }
  return sol;
}

}  // namespace gpc
