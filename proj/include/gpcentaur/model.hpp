#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gpcentaur/algebra.hpp"
#include "gpcentaur/error.hpp"
#include "gpcentaur/units.hpp"

namespace gpc {

inline constexpr std::string_view kUnattributed = "unattributed";

inline bool is_valid_name(std::string_view name) {
  if (name.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (char ch : name) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  }
  return true;
}

inline void require_valid_name(std::string_view name) {
  if (!is_valid_name(name)) {
    throw Error(ErrorCode::InvalidName, "'" + std::string(name) +
                                            "' is not a valid name (letters, digits, '_'; no whitespace or '.')");
  }
}

/// Splits "A.V[2]" into {"A.V", 2}; keys without an index give nullopt.
inline std::pair<VarKey, std::optional<int>> split_element(const VarKey& key) {
  if (key.empty() || key.back() != ']') return {key, std::nullopt};
  auto open = key.rfind('[');
  if (open == std::string::npos) return {key, std::nullopt};
  try {
    return {key.substr(0, open), std::stoi(key.substr(open + 1, key.size() - open - 2))};
  } catch (const std::logic_error&) {
    return {key, std::nullopt};
  }
}

inline VarKey element_key(const VarKey& base, int i) { return base + "[" + std::to_string(i) + "]"; }

struct VariableDecl {
  std::string name;
  std::optional<int> shape;  // absent for scalars
  std::string units_text;
  Units units;
  std::string owner;
  std::string note;
};

/// One substituted value (or full vector of values) with who fixed it.
struct Substitution {
  std::vector<double> values;
  std::string fixed_by = "file";

  friend bool operator==(const Substitution&, const Substitution&) = default;
};

/// Keyed by fully qualified variable key; a key is either a whole variable
/// ("A.V", all elements) or a single element ("A.V[1]").
class SubstitutionMap {
 public:
  void set(const VarKey& key, std::vector<double> values, std::string fixed_by = "file") {
    for (double v : values) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::NonPositiveValue, "substitution for '" + key + "' must be positive, got " + format_number(v));
      }
    }
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "substitution for '" + key + "' has no value");
    // a whole-vector write replaces earlier element writes
    erase_elements(key);
    entries_[key] = Substitution{std::move(values), std::move(fixed_by)};
  }
  void set(const VarKey& key, double value, std::string fixed_by = "file") {
    set(key, std::vector<double>{value}, std::move(fixed_by));
  }

  /// Removes the key and, for a whole variable, all its element entries.
  void erase(const VarKey& key) {
    entries_.erase(key);
    erase_elements(key);
  }

  /// Later map wins.
  void merge(const SubstitutionMap& other) {
    for (const auto& [k, s] : other.entries_) {
      erase_elements(k);
      entries_[k] = s;
    }
  }

  const Substitution* find(const VarKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool contains(const VarKey& key) const { return entries_.count(key) != 0; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<VarKey, Substitution>& entries() const { return entries_; }

  friend bool operator==(const SubstitutionMap&, const SubstitutionMap&) = default;

 private:
  void erase_elements(const VarKey& key) {
    if (split_element(key).second) return;
    const std::string prefix = key + "[";
    for (auto it = entries_.lower_bound(prefix); it != entries_.end() && it->first.starts_with(prefix);) {
      it = entries_.erase(it);
    }
  }

  std::map<VarKey, Substitution> entries_;
};

/// A named node of the model tree. Variable keys inside constraints are
/// fully qualified by the path of the declaring set, rooted at this value's
/// own name.
struct ConstraintSet {
  std::string name;
  std::string owner;
  std::string note;
  std::vector<VariableDecl> vars;
  std::vector<NormalizedConstraint> constraints;
  std::vector<ConstraintSet> children;
  SubstitutionMap substitutions;

  ConstraintSet() = default;
  explicit ConstraintSet(std::string n, std::string own = {}) : name(std::move(n)), owner(std::move(own)) {
    require_valid_name(name);
  }

  /// Declares a variable in this set and returns the monomial for it.
  Monomial declare(VariableDecl decl) {
    require_valid_name(decl.name);
    if (decl.shape && *decl.shape < 1) throw Error(ErrorCode::ShapeMismatch, "shape of '" + decl.name + "' must be >= 1");
    for (const auto& v : vars) {
      if (v.name == decl.name) throw Error(ErrorCode::DuplicateName, "variable '" + decl.name + "' already declared in " + name);
    }
    vars.push_back(std::move(decl));
    return var(vars.back().name);
  }
  Monomial declare(const std::string& var_name, std::optional<int> shape = std::nullopt, const std::string& units = {}) {
    return declare(VariableDecl{var_name, shape, units, parse_units(units), {}, {}});
  }

  /// Monomial for a variable declared directly in this set.
  Monomial var(const std::string& var_name) const {
    for (const auto& v : vars) {
      if (v.name == var_name) return Monomial::variable(name + "." + var_name, v.units);
    }
    throw Error(ErrorCode::UnknownVariable, "'" + var_name + "' is not declared in " + name);
  }

  Monomial element(const std::string& var_name, int i) const {
    Monomial m = var(var_name);
    return rename_keys(m, [&](const VarKey& k) { return element_key(k, i); });
  }

  void add(NormalizedConstraint c) {
    if (c.origin.model_path.empty()) c.origin.model_path = name;
    if (!c.label.empty()) {
      require_valid_name(c.label);
      for (const auto& o : constraints) {
        if (o.label == c.label) throw Error(ErrorCode::DuplicateName, "constraint label '" + c.label + "' repeated in " + name);
      }
    }
    constraints.push_back(std::move(c));
  }
};

/// Prefixes every qualified key in the subtree; used when a set becomes a child.
inline void requalify(ConstraintSet& s, const std::string& prefix) {
  auto f = [&](const VarKey& k) { return prefix + k; };
  for (auto& c : s.constraints) {
    c.body = rename_keys(c.body, f);
    c.origin.model_path = prefix + c.origin.model_path;
  }
  SubstitutionMap subs;
  for (const auto& [k, v] : s.substitutions.entries()) subs.set(prefix + k, v.values, v.fixed_by);
  s.substitutions = std::move(subs);
  for (auto& ch : s.children) requalify(ch, prefix);
}

/// Returns parent with child appended; child's keys gain the parent prefix.
inline ConstraintSet attach(ConstraintSet parent, ConstraintSet child) {
  for (const auto& c : parent.children) {
    if (c.name == child.name) {
      throw Error(ErrorCode::DuplicateName, "'" + child.name + "' is already a child of '" + parent.name + "'");
    }
  }
  requalify(child, parent.name + ".");
  parent.children.push_back(std::move(child));
  return parent;
}

/// Path of a constraint template: "<set path>:<label>" or "<set path>:#<index>".
inline std::string constraint_path(const std::string& set_path, const NormalizedConstraint& c, std::size_t index) {
  return set_path + ":" + (c.label.empty() ? "#" + std::to_string(index) : c.label);
}

/// Strips a trailing broadcast index from a flat constraint path.
inline std::string template_path(const std::string& flat_path) {
  if (!flat_path.empty() && flat_path.back() == ']') {
    auto open = flat_path.rfind('[');
    auto colon = flat_path.rfind(':');
    if (open != std::string::npos && colon != std::string::npos && open > colon) return flat_path.substr(0, open);
  }
  return flat_path;
}

struct VariableInfo {
  VarKey key;            // qualified base key
  std::string set_path;  // declaring set
  VariableDecl decl;
  std::string owner;     // effective (inherited from set when not given)
  bool is_vector() const { return decl.shape.has_value(); }
  int length() const { return decl.shape.value_or(1); }
};

using VariableTable = std::map<VarKey, VariableInfo>;

namespace detail {

inline void collect_vars(const ConstraintSet& s, const std::string& path, const std::string& inherited_owner,
                         VariableTable& out) {
  const std::string owner = s.owner.empty() ? inherited_owner : s.owner;
  for (const auto& v : s.vars) {
    VarKey key = path + "." + v.name;
    out[key] = VariableInfo{key, path, v, v.owner.empty() ? owner : v.owner};
  }
  for (const auto& ch : s.children) collect_vars(ch, path + "." + ch.name, owner, out);
}

}  // namespace detail

inline VariableTable variable_table(const ConstraintSet& model) {
  VariableTable t;
  detail::collect_vars(model, model.name, "", t);
  return t;
}

/// Resolves an identifier as written inside the set at `scope_path`:
/// nearest declaration wins, walking outward; a fully qualified path is
/// tried last. Returns the qualified key (with any element index kept).
inline VarKey resolve_identifier(const VariableTable& table, const std::string& scope_path, const std::string& ident) {
  auto [base, idx] = split_element(ident);
  std::string scope = scope_path;
  for (;;) {
    VarKey candidate = scope.empty() ? base : scope + "." + base;
    if (table.count(candidate)) return idx ? element_key(candidate, *idx) : candidate;
    if (scope.empty()) break;
    auto dot = scope.rfind('.');
    scope = dot == std::string::npos ? std::string() : scope.substr(0, dot);
  }
  throw Error(ErrorCode::UnknownVariable, "'" + ident + "' is not declared in scope " + scope_path);
}

/// Checks that every key names a declared variable (and element indices are
/// in range); returns the common broadcast length of unindexed vector keys
/// (0 when none).
inline int broadcast_length(const std::vector<VarKey>& keys, const VariableTable& table) {
  int n = 0;
  for (const auto& k : keys) {
    auto [base, idx] = split_element(k);
    auto it = table.find(base);
    if (it == table.end()) throw Error(ErrorCode::UnknownVariable, "'" + k + "' is not a declared variable");
    const auto& info = it->second;
    if (idx) {
      if (!info.is_vector()) throw Error(ErrorCode::ShapeMismatch, "'" + base + "' is a scalar and cannot be indexed");
      if (*idx < 0 || *idx >= info.length()) {
        throw Error(ErrorCode::ShapeMismatch, "index " + std::to_string(*idx) + " out of range for '" + base +
                                                  "' of length " + std::to_string(info.length()));
      }
    } else if (info.is_vector()) {
      if (n != 0 && n != info.length()) {
        throw Error(ErrorCode::ShapeMismatch, "vectors of length " + std::to_string(n) + " and " +
                                                  std::to_string(info.length()) + " meet in one expression");
      }
      n = info.length();
    }
  }
  return n;
}

inline std::vector<VarKey> keys_of(const Posynomial& p) {
  std::set<VarKey> ks;
  for (const auto& t : p.terms())
    for (const auto& kv : t.exponents()) ks.insert(kv.first);
  return {ks.begin(), ks.end()};
}

/// Replaces every unindexed vector key by its i-th element.
inline Posynomial broadcast_element(const Posynomial& p, const VariableTable& table, int i) {
  return rename_keys(p, [&](const VarKey& k) {
    auto it = table.find(k);
    return it != table.end() && it->second.is_vector() ? element_key(k, i) : k;
  });
}

/// Expands a constraint over vector variables into one scalar constraint per
/// element; scalars broadcast unchanged.
inline std::vector<NormalizedConstraint> broadcast(const NormalizedConstraint& tmpl, const VariableTable& table) {
  const int n = broadcast_length(keys_of(tmpl.body), table);
  if (n == 0) return {tmpl};
  std::vector<NormalizedConstraint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    NormalizedConstraint c = tmpl;
    c.body = broadcast_element(tmpl.body, table, i);
    out.push_back(std::move(c));
  }
  return out;
}

/// Records substitutions on the model (late-bound: folded only at compile).
inline ConstraintSet substitute(ConstraintSet model, const SubstitutionMap& subs) {
  const VariableTable table = variable_table(model);
  for (const auto& [k, s] : subs.entries()) {
    auto [base, idx] = split_element(k);
    auto it = table.find(base);
    if (it == table.end()) throw Error(ErrorCode::UnknownVariable, "cannot substitute undeclared variable '" + k + "'");
    const auto& info = it->second;
    if (idx) {
      if (!info.is_vector() || *idx < 0 || *idx >= info.length()) throw Error(ErrorCode::ShapeMismatch, "bad element '" + k + "'");
      if (s.values.size() != 1) throw Error(ErrorCode::ShapeMismatch, "element '" + k + "' takes one value");
    } else if (s.values.size() != static_cast<std::size_t>(info.length()) && s.values.size() != 1) {
      throw Error(ErrorCode::ShapeMismatch, "'" + k + "' has length " + std::to_string(info.length()) + ", got " +
                                                std::to_string(s.values.size()) + " values");
    }
  }
  model.substitutions.merge(subs);
  return model;
}

/// Append-only record of constraint removals.
struct AuditEntry {
  std::size_t sequence = 0;
  std::string path;
  std::string remover;
  std::string owner;  // owner of the removed constraint
  std::string reason;
  std::string text;
};

class AuditLog {
 public:
  void append(AuditEntry e) {
    e.sequence = entries_.size();
    entries_.push_back(std::move(e));
  }
  const std::vector<AuditEntry>& entries() const { return entries_; }

 private:
  std::vector<AuditEntry> entries_;
};

namespace detail {

inline bool remove_at(ConstraintSet& s, const std::string& path, const std::string& target, const std::string& inherited,
                      AuditEntry& entry) {
  const std::string owner = s.owner.empty() ? inherited : s.owner;
  for (std::size_t i = 0; i < s.constraints.size(); ++i) {
    if (constraint_path(path, s.constraints[i], i) == target) {
      const auto& c = s.constraints[i];
      entry.owner = c.owner.empty() ? owner : c.owner;
      entry.text = c.origin.text;
      s.constraints.erase(s.constraints.begin() + static_cast<std::ptrdiff_t>(i));
      return true;
    }
  }
  for (auto& ch : s.children) {
    if (remove_at(ch, path + "." + ch.name, target, owner, entry)) return true;
  }
  return false;
}

}  // namespace detail

/// Removing a constraint needs its exact path, the remover's tag and a
/// reason; every removal lands in the audit log.
inline ConstraintSet remove_constraint(ConstraintSet model, const std::string& path, const std::string& remover,
                                       const std::string& reason, AuditLog& log) {
  if (remover.empty()) throw Error(ErrorCode::InvalidArgument, "removal of '" + path + "' needs a remover tag");
  if (reason.empty()) throw Error(ErrorCode::InvalidArgument, "removal of '" + path + "' needs a reason");
  AuditEntry e;
  e.path = path;
  e.remover = remover;
  e.reason = reason;
  if (!detail::remove_at(model, model.name, path, "", e)) {
    throw Error(ErrorCode::UnknownVariable, "no constraint at exact path '" + path + "'");
  }
  log.append(std::move(e));
  return model;
}

/// Owner -> template constraint paths, in depth-first order. Set owners are
/// inherited by their constraints unless overridden.
inline std::map<std::string, std::vector<std::string>> owner_index(const ConstraintSet& model) {
  std::map<std::string, std::vector<std::string>> idx;
  auto walk = [&](auto&& self, const ConstraintSet& s, const std::string& path, const std::string& inherited) -> void {
    const std::string owner = s.owner.empty() ? inherited : s.owner;
    for (std::size_t i = 0; i < s.constraints.size(); ++i) {
      const auto& c = s.constraints[i];
      const std::string o = c.owner.empty() ? owner : c.owner;
      idx[o.empty() ? std::string(kUnattributed) : o].push_back(constraint_path(path, c, i));
    }
    for (const auto& ch : s.children) self(self, ch, path + "." + ch.name, owner);
  };
  walk(walk, model, model.name, "");
  return idx;
}

struct FlatConstraint {
  NormalizedConstraint constraint;
  std::string path;      // template path plus "[i]" for broadcast elements
  std::string set_path;
  std::string owner;     // effective owner, empty when unattributed
};

struct TreeNode {
  std::string path;
  std::string name;
  int depth = 0;
  int parent = -1;
  std::vector<int> children;
};

/// The model with the hierarchy flattened: scalar constraints only.
struct FlatModel {
  Posynomial objective;
  std::vector<FlatConstraint> constraints;
  VariableTable variables;                 // declared base variables
  std::map<VarKey, double> fixed;          // element-level substituted values
  std::map<VarKey, std::string> fixed_by;
  std::vector<TreeNode> tree;              // depth-first, root first
};

inline std::vector<VarKey> element_keys(const VariableInfo& info) {
  if (!info.is_vector()) return {info.key};
  std::vector<VarKey> out;
  for (int i = 0; i < info.length(); ++i) out.push_back(element_key(info.key, i));
  return out;
}

/// Resolves a substitution map against the variable table into
/// element-level fixed values.
inline void resolve_substitutions(const SubstitutionMap& subs, const VariableTable& table, FlatModel& flat) {
  for (const auto& [k, s] : subs.entries()) {
    auto [base, idx] = split_element(k);
    auto it = table.find(base);
    if (it == table.end()) throw Error(ErrorCode::UnknownVariable, "cannot substitute undeclared variable '" + k + "'");
    const auto& info = it->second;
    if (idx) {
      if (!info.is_vector() || *idx < 0 || *idx >= info.length()) throw Error(ErrorCode::ShapeMismatch, "bad element '" + k + "'");
      if (s.values.size() != 1) throw Error(ErrorCode::ShapeMismatch, "element '" + k + "' takes one value");
      flat.fixed[k] = s.values[0];
      flat.fixed_by[k] = s.fixed_by;
      continue;
    }
    const auto keys = element_keys(info);
    if (s.values.size() != keys.size() && s.values.size() != 1) {
      throw Error(ErrorCode::ShapeMismatch, "'" + k + "' has length " + std::to_string(keys.size()) + ", got " +
                                                std::to_string(s.values.size()) + " values");
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      flat.fixed[keys[i]] = s.values.size() == 1 ? s.values[0] : s.values[i];
      flat.fixed_by[keys[i]] = s.fixed_by;
    }
  }
  for (const auto& [k, v] : flat.fixed) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NonPositiveValue, "'" + k + "' substituted with " + format_number(v));
  }
}

namespace detail {

inline void merged_substitutions(const ConstraintSet& s, SubstitutionMap& out) {
  for (const auto& ch : s.children) merged_substitutions(ch, out);
  out.merge(s.substitutions);  // outer sets override inner ones
}

inline void flatten_set(const ConstraintSet& s, const std::string& path, int depth, int parent,
                        const std::string& inherited, const VariableTable& table, FlatModel& flat) {
  const int me = static_cast<int>(flat.tree.size());
  flat.tree.push_back(TreeNode{path, s.name, depth, parent, {}});
  if (parent >= 0) flat.tree[static_cast<std::size_t>(parent)].children.push_back(me);
  const std::string owner = s.owner.empty() ? inherited : s.owner;
  for (std::size_t i = 0; i < s.constraints.size(); ++i) {
    const auto& c = s.constraints[i];
    const std::string tpath = constraint_path(path, c, i);
    const std::string cowner = c.owner.empty() ? owner : c.owner;
    const auto expanded = broadcast(c, table);
    const bool vec = expanded.size() > 1 || broadcast_length(keys_of(c.body), table) > 0;
    for (std::size_t e = 0; e < expanded.size(); ++e) {
      flat.constraints.push_back(FlatConstraint{expanded[e], vec ? tpath + "[" + std::to_string(e) + "]" : tpath,
                                                path, cowner});
    }
  }
  for (const auto& ch : s.children) flatten_set(ch, path + "." + ch.name, depth + 1, me, owner, table, flat);
}

}  // namespace detail

/// Depth-first flattening with broadcasting applied. Unindexed vectors in
/// the objective are broadcast and summed over their elements.
inline FlatModel flatten(const ConstraintSet& model, const Posynomial& objective, const SubstitutionMap& subs = {}) {
  FlatModel flat;
  flat.variables = variable_table(model);
  if (objective.empty()) throw Error(ErrorCode::EmptyObjective, "model has no objective");
  const int n = broadcast_length(keys_of(objective), flat.variables);
  if (n == 0) {
    flat.objective = objective;
  } else {
    std::vector<Monomial> terms;
    for (int i = 0; i < n; ++i) {
      const Posynomial e = broadcast_element(objective, flat.variables, i);
      terms.insert(terms.end(), e.terms().begin(), e.terms().end());
    }
    flat.objective = Posynomial(std::move(terms));
  }
  detail::flatten_set(model, model.name, 0, -1, "", flat.variables, flat);
  SubstitutionMap all;
  detail::merged_substitutions(model, all);
  all.merge(subs);
  resolve_substitutions(all, flat.variables, flat);
  return flat;
}

}  // namespace gpc
