#pragma once

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpcentaur/algebra.hpp"
#include "gpcentaur/error.hpp"
#include "gpcentaur/expr.hpp"
#include "gpcentaur/model.hpp"

namespace gpc {

struct VarDoc {
  std::string name;
  std::optional<int> shape;
  std::string units;
  std::vector<double> value;  // empty: free by default
  std::string owner;
  std::string note;
  friend bool operator==(const VarDoc&, const VarDoc&) = default;
};

struct ConstraintDoc {
  std::string expr;
  std::string label;
  std::string owner;
  std::string note;
  friend bool operator==(const ConstraintDoc&, const ConstraintDoc&) = default;
};

enum class Sense { Minimize, Maximize };

struct ObjectiveDoc {
  Sense sense = Sense::Minimize;
  std::string expr;
  friend bool operator==(const ObjectiveDoc&, const ObjectiveDoc&) = default;
};

/// The persistent form of a model: what a human writes in a .gpm file or a
/// machine exchanges as .gpm.json.
struct ModelDocument {
  std::string name;
  std::string owner;
  std::string note;
  std::vector<VarDoc> vars;
  std::vector<ConstraintDoc> constraints;
  std::vector<ModelDocument> submodels;
  std::optional<ObjectiveDoc> objective;
  friend bool operator==(const ModelDocument&, const ModelDocument&) = default;
};

// ---------------------------------------------------------------------------
// .gpm line format
//
//   model NAME [; owner=O] [; note="..."]
//     var NAME[N] [; units=U] [; value=V | value=V1,V2,...] [; owner=O] [; note="..."]
//     objective minimize|maximize EXPR
//     constraint EXPR [; label=L] [; owner=O] [; note="..."]
//     model CHILD ... end
//   end
//
// Lines starting with '#' are comments. Attribute values are bare text up to
// the next ';' or double-quoted strings with \" \\ \n escapes.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += ch;
    }
  }
  return out + "\"";
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Attr {
  std::string key;
  std::string value;
};

/// Splits "head ; k=v ; k="quoted; text"" into the head and attributes.
inline std::pair<std::string, std::vector<Attr>> split_attrs(std::string_view line, std::string& error) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (in_quote) {
      cur += ch;
      if (ch == '\\' && i + 1 < line.size()) {
        cur += line[++i];
      } else if (ch == '"') {
        in_quote = false;
      }
    } else if (ch == '"') {
      in_quote = true;
      cur += ch;
    } else if (ch == ';') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (in_quote) error = "unterminated string";
  parts.push_back(cur);
  std::vector<Attr> attrs;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    std::string p = trim(parts[i]);
    auto eq = p.find('=');
    if (eq == std::string::npos) {
      error = "attribute '" + p + "' needs key=value";
      continue;
    }
    std::string key = trim(p.substr(0, eq));
    std::string val = trim(p.substr(eq + 1));
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
      std::string un;
      for (std::size_t j = 1; j + 1 < val.size(); ++j) {
        if (val[j] == '\\' && j + 2 < val.size()) {
          char n = val[++j];
          un += n == 'n' ? '\n' : n;
        } else {
          un += val[j];
        }
      }
      val = std::move(un);
    }
    attrs.push_back({key, val});
  }
  return {trim(parts[0]), std::move(attrs)};
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline void write_gpm(const ModelDocument& d, int depth, std::ostream& os) {
  const std::string ind(static_cast<std::size_t>(depth) * 2, ' ');
  os << ind << "model " << d.name;
  if (!d.owner.empty()) os << " ; owner=" << quote(d.owner);
  if (!d.note.empty()) os << " ; note=" << quote(d.note);
  os << "\n";
  for (const auto& v : d.vars) {
    os << ind << "  var " << v.name;
    if (v.shape) os << "[" << *v.shape << "]";
    if (!v.units.empty()) os << " ; units=" << v.units;
    if (!v.value.empty()) {
      os << " ; value=";
      for (std::size_t i = 0; i < v.value.size(); ++i) os << (i ? "," : "") << format_number(v.value[i]);
    }
    if (!v.owner.empty()) os << " ; owner=" << quote(v.owner);
    if (!v.note.empty()) os << " ; note=" << quote(v.note);
    os << "\n";
  }
  if (d.objective) {
    os << ind << "  objective " << (d.objective->sense == Sense::Minimize ? "minimize " : "maximize ")
       << d.objective->expr << "\n";
  }
  for (const auto& c : d.constraints) {
    os << ind << "  constraint " << c.expr;
    if (!c.label.empty()) os << " ; label=" << c.label;
    if (!c.owner.empty()) os << " ; owner=" << quote(c.owner);
    if (!c.note.empty()) os << " ; note=" << quote(c.note);
    os << "\n";
  }
  for (const auto& s : d.submodels) write_gpm(s, depth + 1, os);
  os << ind << "end\n";
}

}  // namespace detail

inline std::string to_gpm(const ModelDocument& doc) {
  std::ostringstream os;
  detail::write_gpm(doc, 0, os);
  return os.str();
}

/// Parses the .gpm line format; all structural problems are reported at once.
inline ModelDocument parse_gpm(std::string_view text) {
  std::vector<Issue> issues;
  std::vector<ModelDocument> stack;
  std::optional<ModelDocument> root;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  auto issue = [&](const std::string& msg) { issues.push_back({"line " + std::to_string(lineno), msg}); };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::string err;
    auto [head, attrs] = detail::split_attrs(line, err);
    if (!err.empty()) issue(err);
    auto sp = head.find_first_of(" \t");
    const std::string kw = head.substr(0, sp);
    const std::string rest = sp == std::string::npos ? std::string() : detail::trim(head.substr(sp));
    auto take_attr = [&](const std::vector<std::string>& allowed, auto&& fn) {
      for (const auto& a : attrs) {
        bool ok = false;
        for (const auto& k : allowed) ok |= a.key == k;
        if (!ok) {
          issue("unknown attribute '" + a.key + "' for " + kw);
          continue;
        }
        fn(a);
      }
    };
    if (kw == "model") {
      if (root) {
        issue("only one root model per document");
        continue;
      }
      ModelDocument d;
      d.name = rest;
      if (!is_valid_name(d.name)) issue("invalid model name '" + d.name + "'");
      take_attr({"owner", "note"}, [&](const detail::Attr& a) { (a.key == "owner" ? d.owner : d.note) = a.value; });
      stack.push_back(std::move(d));
    } else if (kw == "end") {
      if (stack.empty()) {
        issue("'end' without open model");
        continue;
      }
      ModelDocument d = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) {
        root = std::move(d);
      } else {
        stack.back().submodels.push_back(std::move(d));
      }
    } else if (stack.empty()) {
      issue("'" + kw + "' outside of a model block");
    } else if (kw == "var") {
      VarDoc v;
      std::string nm = rest;
      auto br = nm.find('[');
      if (br != std::string::npos) {
        if (nm.back() != ']') {
          issue("bad shape in '" + nm + "'");
        } else {
          try {
            std::size_t used = 0;
            const std::string digits = nm.substr(br + 1, nm.size() - br - 2);
            v.shape = std::stoi(digits, &used);
            if (used != digits.size()) issue("bad shape in '" + nm + "'");
          } catch (const std::logic_error&) {
            issue("bad shape in '" + nm + "'");
          }
        }
        nm = nm.substr(0, br);
      }
      v.name = nm;
      if (!is_valid_name(v.name)) issue("invalid variable name '" + v.name + "'");
      take_attr({"units", "value", "owner", "note"}, [&](const detail::Attr& a) {
        if (a.key == "units") {
          v.units = a.value;
        } else if (a.key == "owner") {
          v.owner = a.value;
        } else if (a.key == "note") {
          v.note = a.value;
        } else {
          std::stringstream ss(a.value);
          std::string item;
          while (std::getline(ss, item, ',')) {
            double x = 0;
            if (!detail::parse_double(detail::trim(item), x)) {
              issue("bad value '" + item + "' for '" + v.name + "'");
            } else {
              v.value.push_back(x);
            }
          }
        }
      });
      stack.back().vars.push_back(std::move(v));
    } else if (kw == "objective") {
      auto s2 = rest.find_first_of(" \t");
      const std::string sense = rest.substr(0, s2);
      ObjectiveDoc o;
      if (sense == "minimize") {
        o.sense = Sense::Minimize;
      } else if (sense == "maximize") {
        o.sense = Sense::Maximize;
      } else {
        issue("objective sense must be minimize or maximize, got '" + sense + "'");
      }
      o.expr = s2 == std::string::npos ? std::string() : detail::trim(rest.substr(s2));
      if (!attrs.empty()) issue("objective takes no attributes");
      if (stack.back().objective) issue("duplicate objective");
      stack.back().objective = o;
    } else if (kw == "constraint") {
      ConstraintDoc c;
      c.expr = rest;
      take_attr({"label", "owner", "note"}, [&](const detail::Attr& a) {
        (a.key == "label" ? c.label : a.key == "owner" ? c.owner : c.note) = a.value;
      });
      stack.back().constraints.push_back(std::move(c));
    } else {
      issue("unknown keyword '" + kw + "'");
    }
  }
  if (!stack.empty()) {
    lineno = lineno + 1;
    issue("missing 'end' for model '" + stack.back().name + "'");
  }
  if (!root && issues.empty()) issues.push_back({"document", "no model block found"});
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return *root;
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ModelDocument& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  if (!d.owner.empty()) j["owner"] = d.owner;
  if (!d.note.empty()) j["note"] = d.note;
  j["vars"] = nlohmann::ordered_json::array();
  for (const auto& v : d.vars) {
    nlohmann::ordered_json jv;
    jv["name"] = v.name;
    if (v.shape) jv["shape"] = *v.shape;
    if (!v.units.empty()) jv["units"] = v.units;
    if (v.value.size() == 1) {
      jv["value"] = v.value[0];
    } else if (!v.value.empty()) {
      jv["value"] = v.value;
    }
    if (!v.owner.empty()) jv["owner"] = v.owner;
    if (!v.note.empty()) jv["note"] = v.note;
    j["vars"].push_back(std::move(jv));
  }
  j["constraints"] = nlohmann::ordered_json::array();
  for (const auto& c : d.constraints) {
    nlohmann::ordered_json jc;
    jc["expr"] = c.expr;
    if (!c.label.empty()) jc["label"] = c.label;
    if (!c.owner.empty()) jc["owner"] = c.owner;
    if (!c.note.empty()) jc["note"] = c.note;
    j["constraints"].push_back(std::move(jc));
  }
  j["submodels"] = nlohmann::ordered_json::array();
  for (const auto& s : d.submodels) j["submodels"].push_back(to_json(s));
  if (d.objective) {
    j["objective"] = {{"sense", d.objective->sense == Sense::Minimize ? "minimize" : "maximize"},
                      {"expr", d.objective->expr}};
  }
  return j;
}

namespace detail {

template <class Json>
void from_json_doc(const Json& j, ModelDocument& d, const std::string& where, std::vector<Issue>& issues) {
  auto str = [&](const Json& o, const char* key, std::string& out, const std::string& w) {
    if (!o.contains(key)) return;
    if (!o[key].is_string()) {
      issues.push_back({w, std::string("'") + key + "' must be a string"});
      return;
    }
    out = o[key].template get<std::string>();
  };
  if (!j.is_object()) {
    issues.push_back({where, "model must be an object"});
    return;
  }
  str(j, "name", d.name, where);
  if (!is_valid_name(d.name)) issues.push_back({where, "invalid model name '" + d.name + "'"});
  const std::string w = d.name.empty() ? where : d.name;
  str(j, "owner", d.owner, w);
  str(j, "note", d.note, w);
  if (j.contains("vars")) {
    for (const auto& jv : j["vars"]) {
      VarDoc v;
      if (!jv.is_object()) {
        issues.push_back({w, "var entries must be objects"});
        continue;
      }
      str(jv, "name", v.name, w);
      if (jv.contains("shape")) {
        if (jv["shape"].is_number_integer()) {
          v.shape = jv["shape"].template get<int>();
        } else {
          issues.push_back({w, "shape of '" + v.name + "' must be an integer"});
        }
      }
      str(jv, "units", v.units, w);
      str(jv, "owner", v.owner, w);
      str(jv, "note", v.note, w);
      if (jv.contains("value")) {
        const auto& val = jv["value"];
        if (val.is_number()) {
          v.value.push_back(val.template get<double>());
        } else if (val.is_array()) {
          for (const auto& x : val) {
            if (x.is_number()) {
              v.value.push_back(x.template get<double>());
            } else {
              issues.push_back({w, "non-numeric value for '" + v.name + "'"});
            }
          }
        } else {
          issues.push_back({w, "value of '" + v.name + "' must be a number or array"});
        }
      }
      d.vars.push_back(std::move(v));
    }
  }
  if (j.contains("constraints")) {
    for (const auto& jc : j["constraints"]) {
      ConstraintDoc c;
      if (!jc.is_object()) {
        issues.push_back({w, "constraint entries must be objects"});
        continue;
      }
      str(jc, "expr", c.expr, w);
      str(jc, "label", c.label, w);
      str(jc, "owner", c.owner, w);
      str(jc, "note", c.note, w);
      d.constraints.push_back(std::move(c));
    }
  }
  if (j.contains("submodels")) {
    for (const auto& js : j["submodels"]) {
      ModelDocument s;
      from_json_doc(js, s, w + ".?", issues);
      d.submodels.push_back(std::move(s));
    }
  }
  if (j.contains("objective")) {
    const auto& jo = j["objective"];
    ObjectiveDoc o;
    std::string sense = "minimize";
    if (jo.is_object()) {
      str(jo, "sense", sense, w);
      str(jo, "expr", o.expr, w);
    } else {
      issues.push_back({w, "objective must be an object {sense, expr}"});
    }
    if (sense == "maximize") {
      o.sense = Sense::Maximize;
    } else if (sense != "minimize") {
      issues.push_back({w, "objective sense must be minimize or maximize"});
    }
    d.objective = o;
  }
}

}  // namespace detail

inline ModelDocument from_json(const nlohmann::json& j) {
  std::vector<Issue> issues;
  ModelDocument d;
  detail::from_json_doc(j, d, "document", issues);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return d;
}

/// Detects the format: JSON when the first non-blank character is '{'.
inline ModelDocument parse_document(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  if (i < text.size() && text[i] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::vector<Issue>{{"json", e.what()}});
    }
    return from_json(j);
  }
  return parse_gpm(text);
}

// ---------------------------------------------------------------------------
// Loading: document -> validated model
// ---------------------------------------------------------------------------

struct LoadOptions {
  bool units = true;  // dimension checking and unit-scale folding
};

/// A validated model ready to flatten: the tree, the file-level
/// substitutions and the (always minimized) objective.
struct LoadedModel {
  ModelDocument document;
  ConstraintSet root;
  SubstitutionMap substitutions;
  Posynomial objective;      // minimized; reciprocal of the written one for maximize
  Sense sense = Sense::Minimize;
  LoadOptions options;
};

namespace detail {

inline ConstraintSet build_decls(const ModelDocument& d, const std::string& path, const LoadOptions& opts,
                                 SubstitutionMap& subs, std::vector<Issue>& issues) {
  ConstraintSet s;
  s.name = d.name;
  s.owner = d.owner;
  s.note = d.note;
  for (const auto& v : d.vars) {
    VariableDecl decl;
    decl.name = v.name;
    decl.shape = v.shape;
    decl.units_text = v.units;
    decl.owner = v.owner;
    decl.note = v.note;
    try {
      if (opts.units) decl.units = parse_units(v.units);
      s.declare(decl);
    } catch (const Error& e) {
      issues.push_back({path + "." + v.name, e.what()});
      continue;
    }
    if (!v.value.empty()) {
      const std::size_t n = static_cast<std::size_t>(v.shape.value_or(1));
      if (v.value.size() != 1 && v.value.size() != n) {
        issues.push_back({path + "." + v.name, "expected " + std::to_string(n) + " values, got " +
                                                   std::to_string(v.value.size())});
        continue;
      }
      try {
        subs.set(path + "." + v.name, v.value, "file");
      } catch (const Error& e) {
        issues.push_back({path + "." + v.name, e.what()});
      }
    }
  }
  for (const auto& sub : d.submodels) {
    bool dup = false;
    for (const auto& ch : s.children) dup |= ch.name == sub.name;
    if (dup) {
      issues.push_back({path + "." + sub.name, "duplicate submodel name"});
      continue;
    }
    if (sub.objective) issues.push_back({path + "." + sub.name, "objective is only allowed on the root model"});
    s.children.push_back(build_decls(sub, path + "." + sub.name, opts, subs, issues));
  }
  return s;
}

inline void lower_constraints(const ModelDocument& d, ConstraintSet& s, const std::string& path,
                              const VariableTable& table, const LoadOptions& opts, std::vector<Issue>& issues) {
  Scope scope{&table, path, opts.units};
  for (std::size_t i = 0; i < d.constraints.size(); ++i) {
    const auto& cd = d.constraints[i];
    const std::string where = path + ":" + (cd.label.empty() ? "#" + std::to_string(i) : cd.label);
    try {
      NormalizedConstraint c = lower_constraint(cd.expr, scope);
      c.label = cd.label;
      c.owner = cd.owner;
      c.note = cd.note;
      broadcast_length(keys_of(c.body), table);
      s.add(std::move(c));
    } catch (const Error& e) {
      issues.push_back({where, e.what()});
    }
  }
  for (std::size_t k = 0; k < d.submodels.size() && k < s.children.size(); ++k) {
    lower_constraints(d.submodels[k], s.children[k], path + "." + d.submodels[k].name, table, opts, issues);
  }
}

}  // namespace detail

/// Validates a document and builds the model. Every problem is collected
/// into one ValidationError.
inline LoadedModel load_model(const ModelDocument& doc, LoadOptions opts = {}) {
  std::vector<Issue> issues;
  LoadedModel m;
  m.document = doc;
  m.options = opts;
  if (!is_valid_name(doc.name)) {
    throw ValidationError(std::vector<Issue>{{"document", "invalid model name '" + doc.name + "'"}});
  }
  m.root = detail::build_decls(doc, doc.name, opts, m.substitutions, issues);
  const VariableTable table = variable_table(m.root);
  detail::lower_constraints(doc, m.root, doc.name, table, opts, issues);
  if (!doc.objective || doc.objective->expr.empty()) {
    issues.push_back({doc.name, "document has no objective"});
  } else {
    try {
      Posynomial obj = lower(parse_expr(doc.objective->expr), Scope{&table, doc.name, opts.units});
      broadcast_length(keys_of(obj), table);
      m.sense = doc.objective->sense;
      if (m.sense == Sense::Maximize) {
        if (!obj.is_monomial()) {
          throw Error(ErrorCode::NotGPRepresentable,
                      "only a monomial can be maximized; rewrite as minimize of a posynomial");
        }
        obj = Posynomial(mono_pow(obj.as_monomial(), -1.0));
      }
      m.objective = std::move(obj);
    } catch (const Error& e) {
      issues.push_back({doc.name + ":objective", e.what()});
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return m;
}

inline LoadedModel load_model(std::string_view text, LoadOptions opts = {}) {
  return load_model(parse_document(text), opts);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline LoadedModel load_model_file(const std::string& path, LoadOptions opts = {}) {
  return load_model(read_file(path), opts);
}

/// Resolves a user-facing key ("a", "Wing.S", "V[2]" or a full path) from
/// the root scope into a qualified key.
inline VarKey resolve_user_key(const ConstraintSet& root, const std::string& name) {
  const VariableTable t = variable_table(root);
  return resolve_identifier(t, root.name, name);
}

}  // namespace gpc
