#pragma once

#include <algorithm>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpcentaur/analysis.hpp"
#include "gpcentaur/error.hpp"

namespace gpc {

struct SweepAxis {
  VarKey key;  // qualified (resolved) key
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  std::size_t max_points = 10000;
  SolverOptions solver;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepPoint {
  std::vector<std::pair<VarKey, double>> subs;
  std::optional<Analysis> result;  // absent when the point failed before solving
  std::string error;
};

inline std::size_t sweep_size(const SweepSpec& spec) {
  if (spec.axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& ax : spec.axes) {
    if (ax.values.empty()) return 0;
    if (n > spec.max_points / ax.values.size() + 1) return spec.max_points + 1;
    n *= ax.values.size();
  }
  return n;
}

/// Checks values, size cap and that every swept variable is substituted in
/// the base scenario.
inline void validate_sweep(const LoadedModel& lm, const Overlay& base, const SweepSpec& spec) {
  const std::size_t n = sweep_size(spec);
  if (n > spec.max_points) {
    throw Error(ErrorCode::SweepTooLarge, "sweep has more than " + std::to_string(spec.max_points) + " points");
  }
  const FlatModel flat = flatten(lm.root, lm.objective, effective_substitutions(lm, base));
  for (const auto& ax : spec.axes) {
    auto [b, idx] = split_element(ax.key);
    auto it = flat.variables.find(b);
    if (it == flat.variables.end()) throw Error(ErrorCode::UnknownVariable, "unknown sweep variable '" + ax.key + "'");
    const auto keys = idx ? std::vector<VarKey>{ax.key} : element_keys(it->second);
    for (const auto& k : keys) {
      if (!flat.fixed.count(k)) {
        throw Error(ErrorCode::SweepVariableNotFixed, "sweep variable '" + ax.key + "' is free; only substituted variables can be swept");
      }
    }
    for (double v : ax.values) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::NonPositiveValue, "sweep value for '" + ax.key + "' must be positive, got " + format_number(v));
      }
    }
  }
}

/// The i-th point of the row-major cartesian product (last axis fastest).
inline std::vector<std::pair<VarKey, double>> sweep_point(const SweepSpec& spec, std::size_t i) {
  std::vector<std::pair<VarKey, double>> out(spec.axes.size());
  for (std::size_t a = spec.axes.size(); a-- > 0;) {
    const auto& vals = spec.axes[a].values;
    out[a] = {spec.axes[a].key, vals[i % vals.size()]};
    i /= vals.size();
  }
  return out;
}

inline SweepPoint evaluate_point(const LoadedModel& lm, const Overlay& base, const SweepSpec& spec, std::size_t i) {
  SweepPoint p;
  p.subs = sweep_point(spec, i);
  Overlay ov = base;
  try {
    for (const auto& [k, v] : p.subs) ov.apply_set(k, {v});
    p.result = analyze(lm, ov, spec.solver);
  } catch (const std::exception& e) {
    p.error = e.what();
  }
  return p;
}

/// Independent solves of every point. Points may run concurrently; the
/// callback sees them in spec order.
inline void sweep_each(const LoadedModel& lm, const Overlay& base, const SweepSpec& spec,
                       const std::function<void(std::size_t, SweepPoint&&)>& emit) {
  validate_sweep(lm, base, spec);
  const std::size_t n = sweep_size(spec);
  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t batch = std::max<std::size_t>(1, threads);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    if (end - start == 1) {
      emit(start, evaluate_point(lm, base, spec, start));
      continue;
    }
    std::vector<std::future<SweepPoint>> futs;
    for (std::size_t i = start; i < end; ++i) {
      futs.push_back(std::async(std::launch::async, [&, i] { return evaluate_point(lm, base, spec, i); }));
    }
    for (std::size_t i = start; i < end; ++i) emit(i, futs[i - start].get());
  }
}

inline std::vector<SweepPoint> sweep(const LoadedModel& lm, const Overlay& base, const SweepSpec& spec) {
  std::vector<SweepPoint> out;
  sweep_each(lm, base, spec, [&](std::size_t, SweepPoint&& p) { out.push_back(std::move(p)); });
  return out;
}

inline nlohmann::ordered_json sweep_point_json(const SweepPoint& p) {
  nlohmann::ordered_json j;
  j["subs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.subs) j["subs"][k] = v;
  if (!p.result) {
    j["status"] = "error";
    j["objective"] = nullptr;
    j["variables"] = nullptr;
    j["error"] = p.error;
    return j;
  }
  const Analysis& a = *p.result;
  j["status"] = std::string(to_string(a.raw.status));
  if (a.optimal()) {
    j["objective"] = a.objective();
    j["variables"] = detail::grouped(a.values());
  } else {
    j["objective"] = nullptr;
    j["variables"] = nullptr;
    if (!a.raw.diagnosis.empty()) j["diagnosis"] = a.raw.diagnosis;
  }
  return j;
}

/// CSV projection: swept values, status, objective and every element-level
/// variable, one row per point. Non-optimal points leave values empty.
inline void write_sweep_csv(const std::vector<SweepPoint>& pts, std::ostream& os) {
  std::vector<VarKey> cols;
  for (const auto& p : pts) {
    if (p.result && p.result->optimal()) {
      for (const auto& [k, _] : p.result->values()) cols.push_back(k);
      break;
    }
  }
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  if (!pts.empty()) {
    for (const auto& [k, _] : pts.front().subs) os << quote("sweep:" + k) << ",";
  }
  os << "status,objective";
  for (const auto& c : cols) os << "," << quote(c);
  os << "\n";
  for (const auto& p : pts) {
    for (const auto& [_, v] : p.subs) os << format_number(v) << ",";
    const bool ok = p.result && p.result->optimal();
    os << (p.result ? std::string(to_string(p.result->raw.status)) : std::string("error")) << ",";
    if (ok) os << format_number(p.result->objective());
    const auto vals = ok ? p.result->values() : std::map<VarKey, double>{};
    for (const auto& c : cols) {
      os << ",";
      if (auto it = vals.find(c); it != vals.end()) os << format_number(it->second);
    }
    os << "\n";
  }
}

struct WhatIf {
  Analysis base;
  Analysis scenario;
  std::optional<SolutionDelta> delta;  // absent when either side is not optimal
};

/// Solves the base scenario and base+override, and compares them.
inline WhatIf whatif(const LoadedModel& lm, const Overlay& base, const Overlay& override_, const SolverOptions& opts = {},
                     double tau = 1e-3) {
  WhatIf w;
  try {
    w.base = analyze(lm, base, opts);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("base scenario: ") + e.what());
  }
  Overlay both = base;
  for (const auto& k : override_.unset) both.apply_unset(k);
  for (const auto& [k, s] : override_.set.entries()) both.apply_set(k, s.values);
  try {
    w.scenario = analyze(lm, both, opts);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("override scenario: ") + e.what());
  }
  if (w.base.optimal() && w.scenario.optimal()) w.delta = delta(w.base, w.scenario, tau);
  return w;
}

}  // namespace gpc
