#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gpcentaur/compile.hpp"
#include "gpcentaur/error.hpp"
#include "gpcentaur/model.hpp"
#include "gpcentaur/solver.hpp"

namespace gpc {

/// Per-node aggregation of sensitivity magnitudes.
struct NodeTotals {
  std::string path;
  std::string name;
  int depth = 0;
  int parent = -1;
  std::vector<int> children;
  double local = 0.0;
  double total = 0.0;
};

/// S_i for every flattened constraint, S_k for every fixed variable, and
/// their tree aggregation. d log p* / du = -S_i when constraint i is
/// relaxed to body <= e^u (or lhs/rhs = e^u for equalities);
/// S_k = d log p* / d log(value of k).
struct SensitivityReport {
  std::map<std::string, double> constraints;
  std::map<VarKey, double> variables;
  std::vector<NodeTotals> tree;
};

inline void require_optimal(const RawSolution& raw) {
  if (raw.status != SolveStatus::Optimal) {
    throw Error(ErrorCode::NotOptimal, "sensitivities need an optimal solution, status is " + std::string(to_string(raw.status)));
  }
}

inline std::map<std::string, double> constraint_sens(const RawSolution& raw, const GPProgram& prog) {
  require_optimal(raw);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < prog.inequalities.size(); ++i) out[prog.inequality_paths[i]] = raw.lambda[i];
  for (std::size_t j = 0; j < prog.equalities.size(); ++j) out[prog.equality_paths[j]] = raw.nu[j];
  return out;
}

inline std::map<VarKey, double> variable_sens(const RawSolution& raw, const GPProgram& prog) {
  require_optimal(raw);
  std::vector<double> s(prog.fixed.size(), 0.0);
  auto add_range = [&](TermRange r, double mult) {
    if (mult == 0.0) return;
    const LseEval e = eval_lse(prog, r, raw.y);
    for (std::size_t t = 0; t < r.size(); ++t) {
      for (const auto& [k, a] : prog.terms[r.begin + t].fixed_a) s[static_cast<std::size_t>(k)] += mult * e.weights[t] * a;
    }
  };
  add_range(prog.objective, 1.0);
  for (std::size_t i = 0; i < prog.inequalities.size(); ++i) add_range(prog.inequalities[i], raw.lambda[i]);
  for (std::size_t j = 0; j < prog.equalities.size(); ++j) {
    for (const auto& [k, a] : prog.equalities[j].fixed_a) s[static_cast<std::size_t>(k)] += raw.nu[j] * a;
  }
  std::map<VarKey, double> out;
  for (std::size_t k = 0; k < prog.fixed.size(); ++k) out[prog.fixed[k].key] = s[k];
  return out;
}

/// local = sum |S_i| over the node's own constraints (flat order) plus sum
/// |S_k| over fixed variables it declares (key order); total = children
/// totals in order, then local.
inline std::vector<NodeTotals> aggregate(const std::map<std::string, double>& cons, const std::map<VarKey, double>& vars,
                                         const FlatModel& flat) {
  std::vector<NodeTotals> out;
  std::map<std::string, int> index;
  for (const auto& n : flat.tree) {
    index[n.path] = static_cast<int>(out.size());
    out.push_back(NodeTotals{n.path, n.name, n.depth, n.parent, n.children, 0.0, 0.0});
  }
  for (const auto& c : flat.constraints) {
    auto it = cons.find(c.path);
    if (it == cons.end()) continue;
    out[static_cast<std::size_t>(index.at(c.set_path))].local += std::abs(it->second);
  }
  for (const auto& [k, v] : vars) {
    const auto& info = flat.variables.at(split_element(k).first);
    out[static_cast<std::size_t>(index.at(info.set_path))].local += std::abs(v);
  }
  // children come after their parent in depth-first order
  for (std::size_t i = out.size(); i-- > 0;) {
    double t = 0.0;
    for (int ch : out[i].children) t += out[static_cast<std::size_t>(ch)].total;
    out[i].total = t + out[i].local;
  }
  return out;
}

inline SensitivityReport sensitivity_report(const RawSolution& raw, const GPProgram& prog, const FlatModel& flat) {
  SensitivityReport r;
  r.constraints = constraint_sens(raw, prog);
  r.variables = variable_sens(raw, prog);
  r.tree = aggregate(r.constraints, r.variables, flat);
  return r;
}

/// Sum of |S| over the flat model, for the conservation check.
inline double flat_magnitude(const SensitivityReport& r) {
  double s = 0.0;
  for (const auto& [_, v] : r.constraints) s += std::abs(v);
  for (const auto& [_, v] : r.variables) s += std::abs(v);
  return s;
}

// ---------------------------------------------------------------------------
// Sankey document
// ---------------------------------------------------------------------------

struct SankeyNode {
  std::string id;
  std::string label;
  int depth = 0;
  double width = 0.0;
  double local = 0.0;
};

struct SankeyLink {
  std::string source;
  std::string target;
  double value = 0.0;
};

struct SankeyDoc {
  std::vector<SankeyNode> nodes;
  std::vector<SankeyLink> links;
  std::string orientation = "root-left";
};

inline SankeyDoc sankey(const std::vector<NodeTotals>& tree) {
  SankeyDoc d;
  for (const auto& n : tree) {
    d.nodes.push_back(SankeyNode{n.path, n.name, n.depth, n.total, n.local});
    for (int ch : n.children) {
      const auto& c = tree[static_cast<std::size_t>(ch)];
      d.links.push_back(SankeyLink{n.path, c.path, c.total});
    }
  }
  return d;
}

inline nlohmann::ordered_json to_json(const SankeyDoc& d) {
  nlohmann::ordered_json j;
  j["orientation"] = d.orientation;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : d.nodes) {
    j["nodes"].push_back({{"id", n.id}, {"label", n.label}, {"depth", n.depth}, {"width", n.width}, {"local", n.local}});
  }
  j["links"] = nlohmann::ordered_json::array();
  for (const auto& l : d.links) j["links"].push_back({{"source", l.source}, {"target", l.target}, {"value", l.value}});
  return j;
}

/// Checks the document invariants; returns the list of violations.
inline std::vector<std::string> validate_sankey(const nlohmann::json& j, double rel_tol = 1e-12) {
  std::vector<std::string> errs;
  if (!j.is_object() || !j.contains("nodes") || !j.contains("links") || !j["nodes"].is_array() || !j["links"].is_array()) {
    return {"document must be an object with 'nodes' and 'links' arrays"};
  }
  struct N {
    int depth;
    double width;
    double local;
    double out = 0.0;
    int incoming = 0;
  };
  std::map<std::string, N> nodes;
  for (const auto& n : j["nodes"]) {
    if (!n.is_object() || !n.contains("id") || !n["id"].is_string() || !n.contains("depth") ||
        !n["depth"].is_number_integer() || !n.contains("width") || !n["width"].is_number() || !n.contains("label")) {
      errs.push_back("node missing id/label/depth/width");
      continue;
    }
    const std::string id = n["id"];
    const double local = n.contains("local") && n["local"].is_number() ? n["local"].get<double>() : 0.0;
    if (!nodes.emplace(id, N{n["depth"].get<int>(), n["width"].get<double>(), local}).second) {
      errs.push_back("duplicate node '" + id + "'");
    }
    if (!(n["width"].get<double>() >= 0.0) || !(local >= 0.0)) errs.push_back("node '" + id + "' has a negative width");
  }
  for (const auto& l : j["links"]) {
    if (!l.is_object() || !l.contains("source") || !l.contains("target") || !l.contains("value") ||
        !l["source"].is_string() || !l["target"].is_string() || !l["value"].is_number()) {
      errs.push_back("link missing source/target/value");
      continue;
    }
    const std::string s = l["source"], t = l["target"];
    const double v = l["value"];
    auto si = nodes.find(s), ti = nodes.find(t);
    if (si == nodes.end() || ti == nodes.end()) {
      errs.push_back("link " + s + " -> " + t + " names an unknown node");
      continue;
    }
    if (!(v >= 0.0)) errs.push_back("link " + s + " -> " + t + " has a negative value");
    if (ti->second.depth != si->second.depth + 1) errs.push_back("link " + s + " -> " + t + " does not increase depth by 1");
    si->second.out += v;
    ti->second.incoming += 1;
  }
  int roots = 0;
  for (const auto& [id, n] : nodes) {
    if (n.incoming == 0) {
      ++roots;
      if (n.depth != 0) errs.push_back("root '" + id + "' is not at depth 0");
    }
    if (n.incoming > 1) errs.push_back("node '" + id + "' has more than one parent");
    const double expect = n.out + n.local;
    if (std::abs(n.width - expect) > rel_tol * std::max(1.0, std::abs(n.width))) {
      errs.push_back("node '" + id + "' width " + format_number(n.width) + " != outgoing + local " + format_number(expect));
    }
  }
  if (!nodes.empty() && roots != 1) errs.push_back("expected exactly one root, found " + std::to_string(roots));
  if (nodes.size() > 0 && j["links"].size() != nodes.size() - static_cast<std::size_t>(roots)) {
    errs.push_back("link count does not match a tree");
  }
  return errs;
}

/// Self-contained HTML page: the document inlined as JSON and a small SVG
/// renderer, no external assets.
inline std::string sankey_html(const SankeyDoc& d, const std::string& title) {
  std::string data = to_json(d).dump();
  // keep "</script>" out of the inline JSON
  for (std::size_t p = 0; (p = data.find("</", p)) != std::string::npos; p += 3) data.replace(p, 2, "<\\/");
  std::string esc;
  for (char c : title) {
    if (c == '<') esc += "&lt;";
    else if (c == '>') esc += "&gt;";
    else if (c == '&') esc += "&amp;";
    else esc += c;
  }
  std::ostringstream os;
  os << R"(<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>)" << esc << R"( sensitivity map</title>
<style>body{font:13px sans-serif;margin:16px}rect{fill:#4a7bb7}path{fill:#9bbbe0;opacity:.6}text{fill:#222}</style>
</head><body><h3>)" << esc << R"( (root at left, thicker is more sensitive)</h3>
<svg id="map" width="960" height="600"></svg>
<script id="sankey-data" type="application/json">)" << data << R"(</script>
<script>
(function(){
var doc=JSON.parse(document.getElementById('sankey-data').textContent);
var svg=document.getElementById('map'),NS='http://www.w3.org/2000/svg';
var byId={},kids={},maxDepth=0,rootW=0;
doc.nodes.forEach(function(n){byId[n.id]=n;kids[n.id]=[];maxDepth=Math.max(maxDepth,n.depth);if(n.depth===0)rootW=Math.max(rootW,n.width);});
doc.links.forEach(function(l){kids[l.source].push(byId[l.target]);});
var H=560,colW=Math.max(120,900/(maxDepth+1)),scale=rootW>0?H/rootW:0;
function el(t,a){var e=document.createElementNS(NS,t);for(var k in a)e.setAttribute(k,a[k]);svg.appendChild(e);return e;}
function place(n,y0){
  var h=Math.max(1,n.width*scale),x=10+n.depth*colW;
  var r=el('rect',{x:x,y:y0,width:14,height:h});
  var tip=document.createElementNS(NS,'title');tip.textContent=n.id+'\ntotal '+n.width+'\nlocal '+n.local;r.appendChild(tip);
  el('text',{x:x+18,y:y0+Math.min(h,20)/2+4}).textContent=n.label+' '+n.width.toPrecision(3);
  var y=y0;
  kids[n.id].forEach(function(c){
    var ch=Math.max(1,c.width*scale),cy=place(c,y);
    var x1=x+14,x2=10+c.depth*colW,m=(x1+x2)/2;
    el('path',{d:'M'+x1+','+y+' C'+m+','+y+' '+m+','+cy+' '+x2+','+cy+' L'+x2+','+(cy+ch)+' C'+m+','+(cy+ch)+' '+m+','+(y+ch)+' '+x1+','+(y+ch)+' Z'});
    y+=ch;
  });
  return y0;
}
var y=10;doc.nodes.filter(function(n){return n.depth===0;}).forEach(function(r){place(r,y);y+=Math.max(1,r.width*scale)+10;});
})();
</script></body></html>
)";
  return os.str();
}

// ---------------------------------------------------------------------------
// Binding constraints by owner
// ---------------------------------------------------------------------------

struct BindingEntry {
  std::string path;
  double sensitivity = 0.0;
};

/// Binding iff |S_i| >= threshold. Every owner that holds a constraint is
/// listed, even when none of its constraints bind.
inline std::map<std::string, std::vector<BindingEntry>> binding_report(const std::map<std::string, double>& cons,
                                                                      const FlatModel& flat, double threshold = 1e-6) {
  std::map<std::string, std::vector<BindingEntry>> out;
  for (const auto& c : flat.constraints) {
    const std::string owner = c.owner.empty() ? std::string(kUnattributed) : c.owner;
    auto& list = out[owner];
    auto it = cons.find(c.path);
    if (it != cons.end() && std::abs(it->second) >= threshold) list.push_back({c.path, it->second});
  }
  for (auto& [_, list] : out) {
    std::stable_sort(list.begin(), list.end(), [](const BindingEntry& a, const BindingEntry& b) {
      return std::abs(a.sensitivity) > std::abs(b.sensitivity);
    });
  }
  return out;
}

}  // namespace gpc
