#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpcentaur/compile.hpp"
#include "gpcentaur/document.hpp"
#include "gpcentaur/model.hpp"
#include "gpcentaur/sensitivity.hpp"
#include "gpcentaur/solver.hpp"

namespace gpc {

/// User-level substitution changes layered over the file values: `unset`
/// keys are removed (the variable becomes free), then `set` wins.
struct Overlay {
  SubstitutionMap set;
  std::set<VarKey> unset;

  void apply_set(const VarKey& key, std::vector<double> values) {
    unset.erase(key);
    set.set(key, std::move(values), "overlay");
  }
  void apply_unset(const VarKey& key) {
    set.erase(key);
    unset.insert(key);
  }
  bool empty() const { return set.empty() && unset.empty(); }
};

/// Resolves a user-written key. Tries scoped resolution from the root, then
/// a unique match on the trailing path component(s).
inline VarKey resolve_key(const VariableTable& table, const std::string& root_name, const std::string& name) {
  try {
    return resolve_identifier(table, root_name, name);
  } catch (const Error&) {
  }
  auto [base, idx] = split_element(name);
  std::vector<VarKey> hits;
  for (const auto& [k, _] : table) {
    if (k.size() > base.size() && k.ends_with("." + base)) hits.push_back(k);
  }
  if (hits.size() == 1) return idx ? element_key(hits[0], *idx) : hits[0];
  if (hits.empty()) throw Error(ErrorCode::UnknownVariable, "unknown variable '" + name + "'");
  std::string list;
  for (const auto& h : hits) list += (list.empty() ? "" : ", ") + h;
  throw Error(ErrorCode::UnknownVariable, "ambiguous variable '" + name + "': " + list);
}

inline SubstitutionMap effective_substitutions(const LoadedModel& lm, const Overlay& ov) {
  SubstitutionMap subs = lm.substitutions;
  for (const auto& k : ov.unset) subs.erase(k);
  subs.merge(ov.set);
  return subs;
}

/// Everything one solve produces.
struct Analysis {
  FlatModel flat;
  GPProgram prog;
  RawSolution raw;
  Sense sense = Sense::Minimize;
  std::optional<SensitivityReport> sens;

  bool optimal() const { return raw.status == SolveStatus::Optimal; }
  /// Objective in the sense the model was written (reciprocal for maximize).
  double objective() const { return sense == Sense::Maximize ? 1.0 / raw.objective : raw.objective; }

  /// Element-level values of every variable, free and fixed, in declared units.
  std::map<VarKey, double> values() const {
    std::map<VarKey, double> out = flat.fixed;
    for (std::size_t j = 0; j < prog.columns.size() && j < raw.y.size(); ++j) out[prog.columns[j]] = std::exp(raw.y[j]);
    return out;
  }
};

inline Analysis analyze(const LoadedModel& lm, const Overlay& ov = {}, const SolverOptions& opts = {}) {
  Analysis a;
  a.sense = lm.sense;
  a.flat = flatten(lm.root, lm.objective, effective_substitutions(lm, ov));
  a.prog = compile(a.flat);
  a.raw = solve(a.prog, opts);
  if (a.optimal()) a.sens = sensitivity_report(a.raw, a.prog, a.flat);
  return a;
}

/// Exit code convention shared by the CLI.
inline int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::Infeasible: return 2;
    case SolveStatus::Unbounded: return 3;
    case SolveStatus::NumericalFailure: return 4;
  }
  return 4;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {

/// Groups element keys "V[i]" under "V" as arrays; scalars stay numbers.
inline nlohmann::ordered_json grouped(const std::map<VarKey, double>& values) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  std::map<VarKey, std::vector<std::pair<int, double>>> vecs;
  for (const auto& [k, v] : values) {
    auto [base, idx] = split_element(k);
    if (idx) {
      vecs[base].emplace_back(*idx, v);
    } else {
      j[k] = v;
    }
  }
  for (auto& [base, items] : vecs) {
    std::sort(items.begin(), items.end());
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& [_, v] : items) arr.push_back(v);
    j[base] = arr;
  }
  return j;
}

inline std::string units_of(const FlatModel& flat, const VarKey& key) {
  auto it = flat.variables.find(split_element(key).first);
  return it == flat.variables.end() || it->second.decl.units_text.empty() ? "-" : it->second.decl.units_text;
}

}  // namespace detail

inline nlohmann::ordered_json solution_json(const Analysis& a) {
  nlohmann::ordered_json j;
  j["status"] = std::string(to_string(a.raw.status));
  if (a.optimal()) {
    j["objective"] = a.objective();
    j["objective_units"] = to_string(a.flat.objective.dimension());
    j["variables"] = detail::grouped(a.values());
    nlohmann::ordered_json s;
    s["constraints"] = nlohmann::ordered_json(a.sens->constraints);
    s["variables"] = nlohmann::ordered_json(a.sens->variables);
    j["sensitivities"] = s;
  } else {
    j["objective"] = nullptr;
    j["message"] = a.raw.message;
    j["diagnosis"] = a.raw.diagnosis;
  }
  j["diagnostics"] = {{"status", std::string(to_string(a.raw.status))},
                      {"iterations", a.raw.newton_iterations + a.raw.phase1_iterations},
                      {"outer_iterations", a.raw.outer_iterations},
                      {"newton_iterations", a.raw.newton_iterations},
                      {"phase1_iterations", a.raw.phase1_iterations},
                      {"gap", a.raw.gap},
                      {"warnings", a.prog.warnings}};
  return j;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Human-readable solution table. The sensitivity column appears only when
/// the model has fixed variables; `sort` orders rows by |sensitivity|.
inline void write_solution_table(const Analysis& a, std::ostream& os, bool sort = false) {
  os << "status: " << to_string(a.raw.status) << "\n";
  if (!a.optimal()) {
    if (!a.raw.message.empty()) os << "message: " << a.raw.message << "\n";
    for (const auto& d : a.raw.diagnosis) os << "  conflicting: " << d << "\n";
    return;
  }
  os << "objective: " << fmt(a.objective()) << " [" << to_string(a.flat.objective.dimension()) << "]\n\n";
  const bool with_sens = !a.sens->variables.empty();
  std::size_t w = 8;
  const auto values = a.values();
  std::vector<std::pair<VarKey, double>> vals(values.begin(), values.end());
  if (sort && with_sens) {
    auto mag = [&](const VarKey& k) {
      auto it = a.sens->variables.find(k);
      return it == a.sens->variables.end() ? -1.0 : std::abs(it->second);
    };
    std::stable_sort(vals.begin(), vals.end(), [&](const auto& x, const auto& y) { return mag(x.first) > mag(y.first); });
  }
  for (const auto& [k, _] : vals) w = std::max(w, k.size());
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %14s  %-10s  %s", static_cast<int>(w), "variable", "value", "units",
                with_sens ? "fixed  sensitivity" : "fixed");
  os << line << "\n";
  for (const auto& [k, v] : vals) {
    const bool fixed = a.flat.fixed.count(k) != 0;
    std::string tail = fixed ? "yes" : "";
    if (with_sens && fixed) tail += "    " + fmt(a.sens->variables.at(k));
    std::snprintf(line, sizeof line, "%-*s  %14s  %-10s  %s", static_cast<int>(w), k.c_str(), fmt(v).c_str(),
                  detail::units_of(a.flat, k).c_str(), tail.c_str());
    os << line << "\n";
  }
  for (const auto& wmsg : a.prog.warnings) os << "warning: " << wmsg << "\n";
}

/// Sensitivities sorted by magnitude, descending; ties by name.
inline std::vector<std::pair<std::string, double>> sorted_sensitivities(const SensitivityReport& r) {
  std::vector<std::pair<std::string, double>> all(r.constraints.begin(), r.constraints.end());
  all.insert(all.end(), r.variables.begin(), r.variables.end());
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return std::abs(x.second) > std::abs(y.second); });
  return all;
}

// ---------------------------------------------------------------------------
// Scenario comparison
// ---------------------------------------------------------------------------

struct SolutionDelta {
  double objective_a = 0.0;
  double objective_b = 0.0;
  double objective_ratio = 1.0;                // B / A
  std::map<VarKey, double> log_ratio;          // log(x_B / x_A) for variables present in both
  std::vector<VarKey> changed;                 // |log ratio| > tau
  std::map<std::string, double> sensitivity_change;  // S_B - S_A, nonzero entries only
};

inline SolutionDelta delta(const Analysis& a, const Analysis& b, double tau = 1e-3) {
  if (!a.optimal() || !b.optimal()) throw Error(ErrorCode::NotOptimal, "delta needs two optimal solutions");
  SolutionDelta d;
  d.objective_a = a.objective();
  d.objective_b = b.objective();
  d.objective_ratio = d.objective_b / d.objective_a;
  const auto va = a.values(), vb = b.values();
  for (const auto& [k, x] : va) {
    auto it = vb.find(k);
    if (it == vb.end()) continue;
    const double r = std::log(it->second) - std::log(x);
    d.log_ratio[k] = r;
    if (std::abs(r) > tau) d.changed.push_back(k);
  }
  auto diff = [&](const auto& ma, const auto& mb) {
    for (const auto& [k, s] : mb) {
      auto it = ma.find(k);
      const double ds = s - (it == ma.end() ? 0.0 : it->second);
      if (ds != 0.0) d.sensitivity_change[k] = ds;
    }
    for (const auto& [k, s] : ma) {
      if (!mb.count(k) && s != 0.0) d.sensitivity_change[k] = -s;
    }
  };
  diff(a.sens->constraints, b.sens->constraints);
  diff(a.sens->variables, b.sens->variables);
  return d;
}

inline nlohmann::ordered_json to_json(const SolutionDelta& d) {
  nlohmann::ordered_json j;
  j["objective_a"] = d.objective_a;
  j["objective_b"] = d.objective_b;
  j["objective_ratio"] = d.objective_ratio;
  j["changed"] = nlohmann::ordered_json::object();
  for (const auto& k : d.changed) j["changed"][k] = d.log_ratio.at(k);
  j["sensitivity_change"] = nlohmann::ordered_json(d.sensitivity_change);
  return j;
}

}  // namespace gpc
