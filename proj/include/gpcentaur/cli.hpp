#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gpcentaur/analysis.hpp"
#include "gpcentaur/document.hpp"
#include "gpcentaur/http.hpp"
#include "gpcentaur/sensitivity.hpp"
#include "gpcentaur/service.hpp"
#include "gpcentaur/sweep.hpp"

namespace gpc {

namespace exit_codes {
inline constexpr int kOk = 0;
inline constexpr int kInvalid = 1;  // check: model has problems
inline constexpr int kUsage = 64;
inline constexpr int kDataErr = 65;
inline constexpr int kNoInput = 66;
}  // namespace exit_codes

namespace detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_values(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) throw UsageError(what + ": '" + item + "' is not a number");
    if (!(v > 0.0) || !std::isfinite(v)) throw UsageError(what + ": values must be positive reals, got '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::pair<std::string, std::vector<double>> parse_assignment(const std::string& text, const std::string& flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError(flag + " expects key=value, got '" + text + "'");
  return {text.substr(0, eq), parse_values(text.substr(eq + 1), flag + " " + text.substr(0, eq))};
}

struct CommonArgs {
  std::string file;
  std::vector<std::string> set;
  std::vector<std::string> unset;
  bool json = false;
  bool verbose = false;
  bool no_units = false;
};

inline void add_common(CLI::App* sub, CommonArgs& a, bool overlay) {
  sub->add_option("model", a.file, "model file (.gpm or .gpm.json)")->required();
  if (overlay) {
    sub->add_option("--set", a.set, "substitute key=value (repeatable, last wins; vectors as v1,v2,...)");
    sub->add_option("--unset", a.unset, "drop a file-level substitution, freeing the variable (repeatable)");
  }
  sub->add_flag("--json", a.json, "machine-readable output");
  sub->add_flag("-v,--verbose", a.verbose, "solver iteration trace on stderr");
  sub->add_flag("--no-units", a.no_units, "skip dimensional checking");
}

inline Overlay build_overlay(const LoadedModel& lm, const CommonArgs& a) {
  Overlay ov;
  const VariableTable table = variable_table(lm.root);
  for (const auto& u : a.unset) ov.apply_unset(resolve_key(table, lm.root.name, u));
  for (const auto& s : a.set) {
    auto [k, v] = parse_assignment(s, "--set");
    ov.apply_set(resolve_key(table, lm.root.name, k), v);
  }
  return ov;
}

inline void write_issues(const Error& e, std::ostream& os) {
  if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
    os << "invalid model: " << v->issues().size() << " issue(s)\n";
    for (const auto& i : v->issues()) os << "  " << i.where << ": " << i.message << "\n";
  } else {
    os << e.what() << "\n";
  }
}

}  // namespace detail

/// Runs one CLI invocation. Machine output goes to `out`, diagnostics to
/// `err`. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"gpcentaur: geometric-programming design models with explainable optima"};
  app.require_subcommand(1, 1);
  CommonArgs a;

  auto* check = app.add_subcommand("check", "validate a model file");
  add_common(check, a, true);

  auto* solve_cmd = app.add_subcommand("solve", "solve and print the optimum");
  add_common(solve_cmd, a, true);
  bool dump_form = false;
  bool sort_rows = false;
  solve_cmd->add_flag("--sort", sort_rows, "order rows by sensitivity magnitude");
  solve_cmd->add_flag("--dump-form", dump_form, "print the compiled log-space program");

  auto* sens_cmd = app.add_subcommand("sens", "sensitivities, sorted by magnitude, and binding constraints by owner");
  add_common(sens_cmd, a, true);
  double threshold = 1e-6;
  sens_cmd->add_option("--threshold", threshold, "binding threshold on |S|")->check(CLI::NonNegativeNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "solve over a grid of substituted values");
  add_common(sweep_cmd, a, true);
  std::vector<std::string> axes;
  bool csv = false;
  std::size_t max_points = 10000;
  sweep_cmd->add_option("--sweep", axes, "key=v1,v2,... (repeatable; cartesian product)")->required();
  sweep_cmd->add_flag("--csv", csv, "CSV instead of JSON lines");
  sweep_cmd->add_option("--max-points", max_points, "cap on the number of points");

  auto* sankey_cmd = app.add_subcommand("sankey", "sensitivity map of the model tree");
  add_common(sankey_cmd, a, true);
  bool html = false;
  std::string output;
  sankey_cmd->add_flag("--html", html, "self-contained HTML page instead of JSON");
  sankey_cmd->add_option("-o,--output", output, "write to a file instead of stdout");

  auto* serve_cmd = app.add_subcommand("serve", "start the what-if HTTP service");
  add_common(serve_cmd, a, false);
  int port = 7341;
  bool open_public = false;
  std::string ui_dir;
  serve_cmd->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_flag("--public", open_public, "listen on all interfaces instead of loopback");
  serve_cmd->add_option("--ui-dir", ui_dir, "directory of static UI assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_codes::kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_codes::kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return exit_codes::kUsage;
  }

  SolverOptions opts;
  const char* trace_env = std::getenv("GPCENTAUR_SOLVER_TRACE");
  if (a.verbose || (trace_env && std::string(trace_env) == "1")) opts.trace = &err;

  if (!std::filesystem::is_regular_file(a.file)) {
    err << "cannot open model file '" << a.file << "'\n";
    return exit_codes::kNoInput;
  }
  LoadOptions lopts;
  lopts.units = !a.no_units;

  if (check->parsed()) {
    try {
      const LoadedModel lm = load_model_file(a.file, lopts);
      const Overlay ov = build_overlay(lm, a);
      const FlatModel flat = flatten(lm.root, lm.objective, effective_substitutions(lm, ov));
      const GPProgram prog = compile(flat);
      if (a.json) {
        nlohmann::ordered_json j{{"valid", true},
                                 {"model", lm.root.name},
                                 {"free_variables", prog.columns.size()},
                                 {"fixed_variables", prog.fixed.size()},
                                 {"inequalities", prog.inequalities.size()},
                                 {"equalities", prog.equalities.size()},
                                 {"warnings", prog.warnings}};
        out << j.dump(2) << "\n";
      } else {
        out << "ok: model " << lm.root.name << ", " << prog.columns.size() << " free and " << prog.fixed.size()
            << " fixed variables, " << prog.inequalities.size() << " inequalities, " << prog.equalities.size()
            << " equalities\n";
        for (const auto& w : prog.warnings) out << "warning: " << w << "\n";
      }
      return exit_codes::kOk;
    } catch (const UsageError& e) {
      err << e.what() << "\n";
      return exit_codes::kUsage;
    } catch (const Error& e) {
      if (a.json) {
        nlohmann::ordered_json j{{"valid", false}, {"issues", nlohmann::ordered_json::array()}};
        if (auto* v = dynamic_cast<const ValidationError*>(&e)) {
          for (const auto& i : v->issues()) j["issues"].push_back({{"where", i.where}, {"message", i.message}});
        } else {
          j["issues"].push_back({{"where", a.file}, {"message", e.what()}});
        }
        out << j.dump(2) << "\n";
      } else {
        write_issues(e, out);
      }
      return exit_codes::kInvalid;
    }
  }

  LoadedModel lm;
  Overlay ov;
  try {
    lm = load_model_file(a.file, lopts);
    ov = build_overlay(lm, a);
  } catch (const UsageError& e) {
    err << e.what() << "\n";
    return exit_codes::kUsage;
  } catch (const std::ios_base::failure& e) {
    err << e.what() << "\n";
    return exit_codes::kNoInput;
  } catch (const Error& e) {
    write_issues(e, err);
    return exit_codes::kDataErr;
  }

  if (serve_cmd->parsed()) {
    WhatIfService svc(opts);
    httplib::Server srv;
    bind_routes(srv, svc, ui_dir);
    const std::string host = open_public ? "0.0.0.0" : "127.0.0.1";
    std::thread loader([&svc, model = std::move(lm)]() mutable { svc.load(std::move(model)); });
    err << "serving " << a.file << " on http://" << host << ":" << port << "\n";
    const bool ok = srv.listen(host, port);
    loader.join();
    if (!ok) {
      err << "could not listen on " << host << ":" << port << "\n";
      return exit_codes::kUsage;
    }
    return exit_codes::kOk;
  }

  if (sweep_cmd->parsed()) {
    SweepSpec spec;
    spec.solver = opts;
    spec.max_points = max_points;
    try {
      const VariableTable table = variable_table(lm.root);
      for (const auto& ax : axes) {
        auto [k, v] = parse_assignment(ax, "--sweep");
        spec.axes.push_back(SweepAxis{resolve_key(table, lm.root.name, k), v});
      }
      const auto pts = sweep(lm, ov, spec);
      if (csv) {
        write_sweep_csv(pts, out);
      } else {
        for (const auto& p : pts) out << sweep_point_json(p).dump() << "\n";
      }
    } catch (const UsageError& e) {
      err << e.what() << "\n";
      return exit_codes::kUsage;
    } catch (const Error& e) {
      err << e.what() << "\n";
      return exit_codes::kDataErr;
    }
    return exit_codes::kOk;
  }

  Analysis an;
  try {
    an = analyze(lm, ov, opts);
  } catch (const Error& e) {
    write_issues(e, err);
    return exit_codes::kDataErr;
  }

  if (solve_cmd->parsed()) {
    if (dump_form) dump_standard_form(an.prog, a.json ? err : out);
    if (a.json) {
      out << solution_json(an).dump(2) << "\n";
    } else {
      write_solution_table(an, out, sort_rows);
    }
    if (!an.optimal()) {
      err << to_string(an.raw.status) << ": " << an.raw.message << "\n";
      for (const auto& d : an.raw.diagnosis) err << "  conflicting: " << d << "\n";
    }
    return exit_code(an.raw.status);
  }

  if (!an.optimal()) {
    err << to_string(an.raw.status) << ": " << an.raw.message << "\n";
    for (const auto& d : an.raw.diagnosis) err << "  conflicting: " << d << "\n";
    return exit_code(an.raw.status);
  }

  if (sens_cmd->parsed()) {
    const auto sorted = sorted_sensitivities(*an.sens);
    const auto binding = binding_report(an.sens->constraints, an.flat, threshold);
    if (a.json) {
      nlohmann::ordered_json j;
      j["objective"] = an.objective();
      j["sensitivities"] = nlohmann::ordered_json::array();
      for (const auto& [k, s] : sorted) j["sensitivities"].push_back({{"key", k}, {"sensitivity", s}});
      j["tree"] = nlohmann::ordered_json::array();
      for (const auto& n : an.sens->tree) j["tree"].push_back({{"path", n.path}, {"local", n.local}, {"total", n.total}});
      j["binding"] = nlohmann::ordered_json::object();
      for (const auto& [owner, list] : binding) {
        j["binding"][owner] = nlohmann::ordered_json::array();
        for (const auto& e : list) j["binding"][owner].push_back({{"path", e.path}, {"sensitivity", e.sensitivity}});
      }
      out << j.dump(2) << "\n";
    } else {
      std::size_t w = 10;
      for (const auto& [k, _] : sorted) w = std::max(w, k.size());
      char line[512];
      std::snprintf(line, sizeof line, "%-*s  %12s  %s", static_cast<int>(w), "constraint/variable", "sensitivity", "kind");
      out << line << "\n";
      for (const auto& [k, s] : sorted) {
        std::snprintf(line, sizeof line, "%-*s  %12s  %s", static_cast<int>(w), k.c_str(), fmt(s).c_str(),
                      an.sens->variables.count(k) ? "fixed variable" : "constraint");
        out << line << "\n";
      }
      out << "\nbinding constraints by owner (|S| >= " << fmt(threshold) << "):\n";
      for (const auto& [owner, list] : binding) {
        out << "  " << owner << (list.empty() ? ": none\n" : ":\n");
        for (const auto& e : list) out << "    " << e.path << "  " << fmt(e.sensitivity) << "\n";
      }
    }
    return exit_codes::kOk;
  }

  if (sankey_cmd->parsed()) {
    const SankeyDoc doc = sankey(an.sens->tree);
    const std::string text = html ? sankey_html(doc, lm.root.name) : to_json(doc).dump(2) + "\n";
    if (output.empty()) {
      out << text;
    } else {
      std::ofstream f(output, std::ios::binary);
      if (!f) {
        err << "cannot write '" << output << "'\n";
        return exit_codes::kNoInput;
      }
      f << text;
    }
    return exit_codes::kOk;
  }
  return exit_codes::kUsage;
}

}  // namespace gpc
