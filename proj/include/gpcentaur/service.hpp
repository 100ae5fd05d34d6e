#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpcentaur/analysis.hpp"
#include "gpcentaur/sweep.hpp"

namespace gpc {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

struct HistoryEntry {
  std::uint64_t revision = 0;
  Overlay overlay;
  std::shared_ptr<const Analysis> analysis;
};

struct SweepJob {
  std::shared_ptr<const LoadedModel> model;
  Overlay overlay;
  SweepSpec spec;
  std::uint64_t revision = 0;
};

inline nlohmann::ordered_json overlay_json(const Overlay& ov) {
  nlohmann::ordered_json j;
  j["set"] = nlohmann::ordered_json::object();
  for (const auto& [k, s] : ov.set.entries()) {
    if (s.values.size() == 1) {
      j["set"][k] = s.values[0];
    } else {
      j["set"][k] = s.values;
    }
  }
  j["unset"] = nlohmann::ordered_json(std::vector<std::string>(ov.unset.begin(), ov.unset.end()));
  return j;
}

/// Single-model what-if session. Handlers are plain methods so they can be
/// exercised without a socket; `bind_routes` attaches them to an HTTP server.
class WhatIfService {
 public:
  explicit WhatIfService(SolverOptions opts = {}, std::size_t ring_size = 20, double threshold = 1e-6)
      : opts_(opts), ring_size_(ring_size), threshold_(threshold) {}

  void load(LoadedModel lm) {
    std::lock_guard lock(mu_);
    model_ = std::make_shared<const LoadedModel>(std::move(lm));
  }
  bool loaded() const {
    std::lock_guard lock(mu_);
    return model_ != nullptr;
  }
  std::uint64_t revision() const {
    std::lock_guard lock(mu_);
    return revision_;
  }

  HttpResponse get_model() const {
    std::shared_ptr<const LoadedModel> m;
    Overlay ov;
    std::uint64_t rev;
    {
      std::lock_guard lock(mu_);
      if (!model_) return not_ready();
      m = model_;
      ov = overlay_;
      rev = revision_;
    }
    nlohmann::ordered_json j;
    j["revision"] = rev;
    j["model"] = to_json(m->document);
    const VariableTable table = variable_table(m->root);
    j["variables"] = nlohmann::ordered_json::array();
    for (const auto& [k, info] : table) {
      nlohmann::ordered_json v{{"key", k}, {"set_path", info.set_path}, {"units", info.decl.units_text},
                               {"owner", info.owner}, {"note", info.decl.note}};
      if (info.decl.shape) v["shape"] = *info.decl.shape;
      j["variables"].push_back(v);
    }
    const FlatModel flat = flatten(m->root, m->objective, effective_substitutions(*m, ov));
    j["constraints"] = nlohmann::ordered_json::array();
    for (const auto& c : flat.constraints) {
      j["constraints"].push_back({{"path", c.path}, {"label", c.constraint.label}, {"owner", c.owner},
                                  {"note", c.constraint.note}, {"text", c.constraint.origin.text}});
    }
    j["tree"] = nlohmann::ordered_json::array();
    for (const auto& n : flat.tree) {
      j["tree"].push_back({{"path", n.path}, {"name", n.name}, {"depth", n.depth}});
    }
    j["substitutions"] = nlohmann::ordered_json(flat.fixed);
    j["overlay"] = overlay_json(ov);
    return {200, j.dump()};
  }

  HttpResponse post_solve(const std::string& body) {
    nlohmann::json req;
    try {
      req = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error(400, "MalformedRequest", std::string("body is not JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "MalformedRequest", "body must be a JSON object");
    for (const auto& [k, _] : req.items()) {
      if (k != "set" && k != "unset") return error(400, "MalformedRequest", "unexpected field '" + k + "'");
    }
    if (req.contains("set") && !req["set"].is_object()) return error(400, "MalformedRequest", "'set' must be an object");
    if (req.contains("unset") && !req["unset"].is_array()) return error(400, "MalformedRequest", "'unset' must be an array");

    std::lock_guard lock(mu_);  // solves serialize on the session
    if (!model_) return not_ready();
    const VariableTable table = variable_table(model_->root);
    Overlay next = overlay_;
    std::vector<std::string> offenders;
    std::string kind = "UnknownVariable";
    if (req.contains("unset")) {
      for (const auto& k : req["unset"]) {
        if (!k.is_string()) return error(400, "MalformedRequest", "'unset' entries must be strings");
        try {
          next.apply_unset(resolve_key(table, model_->root.name, k.get<std::string>()));
        } catch (const Error&) {
          offenders.push_back(k.get<std::string>());
        }
      }
    }
    if (req.contains("set")) {
      for (const auto& [k, v] : req["set"].items()) {
        std::vector<double> vals;
        if (v.is_number()) {
          vals.push_back(v.get<double>());
        } else if (v.is_array() && !v.empty()) {
          for (const auto& x : v) {
            if (!x.is_number()) return error(400, "MalformedRequest", "value for '" + k + "' must be numeric");
            vals.push_back(x.get<double>());
          }
        } else {
          return error(400, "MalformedRequest", "value for '" + k + "' must be a number or array of numbers");
        }
        VarKey key;
        try {
          key = resolve_key(table, model_->root.name, k);
        } catch (const Error&) {
          offenders.push_back(k);
          continue;
        }
        try {
          next.apply_set(key, vals);
        } catch (const Error&) {
          offenders.push_back(k);
          kind = offenders.size() == 1 ? "NonPositiveValue" : "InvalidSubstitution";
        }
      }
    }
    if (!offenders.empty()) {
      nlohmann::ordered_json j{{"error", kind}, {"offenders", offenders}, {"revision", revision_.load()}};
      return {422, j.dump()};
    }
    std::shared_ptr<Analysis> a;
    try {
      a = std::make_shared<Analysis>(analyze(*model_, next, opts_));
    } catch (const Error& e) {
      return error(422, std::string(to_string(e.code())), e.what());
    }
    overlay_ = next;
    ++revision_;
    nlohmann::ordered_json j;
    j["revision"] = revision_.load();
    j["status"] = std::string(to_string(a->raw.status));
    j["solution"] = solution_json(*a);
    if (a->optimal()) {
      j["sankey"] = to_json(sankey(a->sens->tree));
      nlohmann::ordered_json b = nlohmann::ordered_json::object();
      for (const auto& [owner, list] : binding_report(a->sens->constraints, a->flat, threshold_)) {
        b[owner] = nlohmann::ordered_json::array();
        for (const auto& e : list) b[owner].push_back({{"path", e.path}, {"sensitivity", e.sensitivity}});
      }
      j["binding"] = b;
    } else {
      j["sankey"] = nullptr;
      j["binding"] = nullptr;
    }
    j["delta"] = nullptr;
    if (!ring_.empty() && ring_.front().analysis->optimal() && a->optimal()) {
      j["delta"] = to_json(delta(*ring_.front().analysis, *a));
      j["delta"]["against_revision"] = ring_.front().revision;
    }
    if (a->optimal()) {
      const auto errs = validate_sankey(nlohmann::json::parse(j["sankey"].dump()));
      if (!errs.empty()) return error(500, "InvalidSankey", errs.front());
    }
    j["overlay"] = overlay_json(overlay_);
    ring_.push_front(HistoryEntry{revision_.load(), overlay_, a});
    while (ring_.size() > ring_size_) ring_.pop_back();
    return {200, j.dump()};
  }

  /// Validates a sweep request: {"var": k, "values": [...]} or
  /// {"vars": {k: [...], ...}}. Returns an error response or a job.
  std::variant<HttpResponse, SweepJob> prepare_sweep(const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error(400, "MalformedRequest", std::string("body is not JSON: ") + e.what());
    }
    if (!req.is_object()) return error(400, "MalformedRequest", "body must be a JSON object");
    SweepJob job;
    {
      std::lock_guard lock(mu_);
      if (!model_) return not_ready();
      job.model = model_;
      job.overlay = overlay_;
      job.revision = revision_;
    }
    job.spec.solver = opts_;
    std::vector<std::pair<std::string, nlohmann::json>> axes;
    if (req.contains("var") && req.contains("values")) {
      if (!req["var"].is_string()) return error(400, "MalformedRequest", "'var' must be a string");
      axes.emplace_back(req["var"].get<std::string>(), req["values"]);
    } else if (req.contains("vars") && req["vars"].is_object()) {
      for (const auto& [k, v] : req["vars"].items()) axes.emplace_back(k, v);
    } else {
      return error(400, "MalformedRequest", "expected {var, values} or {vars}");
    }
    const VariableTable table = variable_table(job.model->root);
    for (const auto& [k, v] : axes) {
      if (!v.is_array()) return error(400, "MalformedRequest", "values for '" + k + "' must be an array");
      SweepAxis ax;
      for (const auto& x : v) {
        if (!x.is_number()) return error(400, "MalformedRequest", "values for '" + k + "' must be numeric");
        ax.values.push_back(x.get<double>());
      }
      try {
        ax.key = resolve_key(table, job.model->root.name, k);
      } catch (const Error& e) {
        return error(422, "UnknownVariable", e.what());
      }
      job.spec.axes.push_back(std::move(ax));
    }
    try {
      validate_sweep(*job.model, job.overlay, job.spec);
    } catch (const Error& e) {
      return error(422, std::string(to_string(e.code())), e.what());
    }
    return job;
  }

  /// Streams one JSON line per point, in spec order. `sink` returns false
  /// to stop early (client went away).
  static void run_sweep(const SweepJob& job, const std::function<bool(const std::string&)>& sink) {
    bool open = true;
    sweep_each(*job.model, job.overlay, job.spec, [&](std::size_t, SweepPoint&& p) {
      if (!open) return;
      nlohmann::ordered_json j = sweep_point_json(p);
      j["revision"] = job.revision;
      open = sink(j.dump() + "\n");
    });
  }

  /// Convenience for tests: the whole stream as one body.
  HttpResponse post_sweep(const std::string& body) const {
    auto prepared = prepare_sweep(body);
    if (auto* r = std::get_if<HttpResponse>(&prepared)) return *r;
    HttpResponse res{200, "", "application/x-ndjson"};
    run_sweep(std::get<SweepJob>(prepared), [&](const std::string& line) {
      res.body += line;
      return true;
    });
    return res;
  }

  HttpResponse get_history() const {
    std::lock_guard lock(mu_);
    nlohmann::ordered_json j;
    j["revision"] = revision_.load();
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : ring_) {
      nlohmann::ordered_json o{{"revision", e.revision}, {"overlay", overlay_json(e.overlay)},
                               {"status", std::string(to_string(e.analysis->raw.status))}};
      o["objective"] = e.analysis->optimal() ? nlohmann::ordered_json(e.analysis->objective()) : nlohmann::ordered_json(nullptr);
      j["entries"].push_back(o);
    }
    return {200, j.dump()};
  }

 private:
  HttpResponse not_ready() const {
    nlohmann::ordered_json j{{"error", "NotReady"}, {"message", "model is still loading"}, {"revision", revision_.load()}};
    HttpResponse r{503, j.dump()};
    r.headers["Retry-After"] = "1";
    return r;
  }
  HttpResponse error(int status, const std::string& kind, const std::string& msg) const {
    nlohmann::ordered_json j{{"error", kind}, {"message", msg}, {"revision", revision_.load()}};
    return {status, j.dump()};
  }

  SolverOptions opts_;
  std::size_t ring_size_;
  double threshold_;
  mutable std::mutex mu_;
  std::shared_ptr<const LoadedModel> model_;
  Overlay overlay_;
  std::atomic<std::uint64_t> revision_{0};
  std::deque<HistoryEntry> ring_;
};

}  // namespace gpc
