// Copyright 2026 The mmflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Disconnector detection between a reference ("healthy") graph H and a
// comparison ("patient") graph P on the same nodes.
//
//  1. Find the modules (connected components) of H and of P.
//  2. A healthy module whose nodes intersect two or more patient modules
//     has split; those patient modules form its set D.
//  3. For every pair of modules in D, let N be the union of their nodes and
//     compare the induced subgraphs h' = H[N], p' = P[N]. Edges of
//     E(h') \ E(p') whose endpoints sit in the current healthy module and in
//     two different patient modules are direct disconnectors. A pair with
//     no direct disconnector was separated indirectly, through other modules.

#pragma once

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/graph.hpp"

namespace mmflow {

/// Pair of patient module indices, always first < second.
struct ModulePair {
  std::size_t first = 0;
  std::size_t second = 0;

  friend constexpr auto operator<=>(const ModulePair&, const ModulePair&) = default;
  friend constexpr bool operator==(const ModulePair&, const ModulePair&) = default;
};

/// Outcome of step 3 for one 2-combination of patient modules.
struct PairAnalysis {
  ModulePair pair;
  /// E(h') \ E(p') over the pair's node union.
  EdgeSet difference;
  /// Members of `difference` with endpoints in the current healthy module and
  /// in the two different patient modules.
  EdgeSet direct;
  /// Remaining members of `difference`, kept for inspection only.
  EdgeSet rejected;

  bool indirect() const { return direct.empty(); }
};

/// A healthy module whose nodes spread over several patient modules.
struct SplitRecord {
  std::size_t healthy_module = 0;
  /// Patient modules intersecting the healthy module (the set D), sorted.
  std::vector<std::size_t> patient_modules;
  /// One entry per 2-combination of `patient_modules`, in sorted order.
  std::vector<PairAnalysis> pairs;

  /// Union of direct disconnectors across all pairs of this split.
  EdgeSet direct_union() const {
    EdgeSet out;
    for (const auto& pa : pairs) out.insert(pa.direct.begin(), pa.direct.end());
    return out;
  }
};

struct DisconnectorReport {
  ModulePartition healthy_modules;
  ModulePartition patient_modules;
  std::vector<SplitRecord> splits;

  /// Union of every direct disconnector in the report.
  EdgeSet direct_edges() const {
    EdgeSet out;
    for (const auto& s : splits) {
      const auto u = s.direct_union();
      out.insert(u.begin(), u.end());
    }
    return out;
  }

  /// Patient module pair -> direct disconnectors (merged over splits).
  std::map<ModulePair, EdgeSet> direct() const {
    std::map<ModulePair, EdgeSet> out;
    for (const auto& s : splits) {
      for (const auto& pa : s.pairs) {
        if (!pa.direct.empty()) out[pa.pair].insert(pa.direct.begin(), pa.direct.end());
      }
    }
    return out;
  }

  /// Patient module pairs separated only indirectly.
  std::set<ModulePair> indirect() const {
    std::set<ModulePair> out;
    for (const auto& s : splits) {
      for (const auto& pa : s.pairs) {
        if (pa.indirect()) out.insert(pa.pair);
      }
    }
    return out;
  }

  EdgeSet rejected_edges() const {
    EdgeSet out;
    for (const auto& s : splits) {
      for (const auto& pa : s.pairs) out.insert(pa.rejected.begin(), pa.rejected.end());
    }
    return out;
  }

  bool empty() const { return splits.empty(); }
};

/// Healthy modules that intersect at least two patient modules.
inline std::vector<SplitRecord> detect_splits(const ModulePartition& healthy,
                                              const ModulePartition& patient) {
  if (healthy.node_to_module.size() != patient.node_to_module.size()) {
    throw InputError("partitions cover different node spaces");
  }
  for (std::size_t id = 0; id < healthy.node_to_module.size(); ++id) {
    const bool in_h = healthy.node_to_module[id] != ModulePartition::npos;
    const bool in_p = patient.node_to_module[id] != ModulePartition::npos;
    if (in_h != in_p) {
      throw InputError("node " + std::to_string(id + 1) +
                       " is covered by only one of the partitions");
    }
  }
  std::vector<SplitRecord> splits;
  for (std::size_t h = 0; h < healthy.modules.size(); ++h) {
    std::set<std::size_t> touched;
    for (NodeId id : healthy.modules[h]) touched.insert(patient.module_of(id));
    if (touched.size() >= 2) {
      SplitRecord rec;
      rec.healthy_module = h;
      rec.patient_modules.assign(touched.begin(), touched.end());
      splits.push_back(std::move(rec));
    }
  }
  return splits;
}

/// Full three-step analysis of H against P.
inline DisconnectorReport find_disconnectors(const LabeledGraph& healthy,
                                             const LabeledGraph& patient) {
  require_same_node_space(healthy, patient);
  DisconnectorReport report;
  report.healthy_modules = connected_components(healthy);
  report.patient_modules = connected_components(patient);
  report.splits = detect_splits(report.healthy_modules, report.patient_modules);

  const auto& hp = report.healthy_modules;
  const auto& pp = report.patient_modules;
  for (auto& split : report.splits) {
    const auto& d = split.patient_modules;
    for (std::size_t a = 0; a < d.size(); ++a) {
      for (std::size_t b = a + 1; b < d.size(); ++b) {
        std::vector<NodeId> union_nodes(pp.modules[d[a]]);
        union_nodes.insert(union_nodes.end(), pp.modules[d[b]].begin(),
                           pp.modules[d[b]].end());
        const auto h_sub = induced_subgraph(healthy, union_nodes);
        const auto p_sub = induced_subgraph(patient, union_nodes);

        PairAnalysis pa;
        pa.pair = {d[a], d[b]};
        pa.difference = edge_difference(h_sub, p_sub);
        for (const auto& e : pa.difference) {
          const bool in_current = hp.module_of(e.u) == split.healthy_module &&
                                  hp.module_of(e.v) == split.healthy_module;
          const bool crosses = pp.module_of(e.u) != pp.module_of(e.v);
          (in_current && crosses ? pa.direct : pa.rejected).insert(e);
        }
        split.pairs.push_back(std::move(pa));
      }
    }
  }
  return report;
}

/// Brute-force reference: every edge of H missing from P whose endpoints are
/// mutually reachable in H but not in P. Reachability comes from a
/// transitive closure, independent of connected_components.
inline EdgeSet disconnector_oracle(const LabeledGraph& healthy,
                                   const LabeledGraph& patient) {
  require_same_node_space(healthy, patient);
  const std::size_t n = healthy.id_space();
  const auto closure = [n](const LabeledGraph& g) {
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (NodeId i = 0; i < n; ++i) reach[i][i] = 1;
    for (const auto& e : g.edges()) reach[e.u][e.v] = reach[e.v][e.u] = 1;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!reach[i][k]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (reach[k][j]) reach[i][j] = 1;
        }
      }
    }
    return reach;
  };
  const auto reach_h = closure(healthy);
  const auto reach_p = closure(patient);
  EdgeSet out;
  for (const auto& e : healthy.edges()) {
    if (patient.edges().count(e)) continue;
    if (reach_h[e.u][e.v] && !reach_p[e.u][e.v]) out.insert(e);
  }
  return out;
}

namespace detail {

inline nlohmann::ordered_json edges_json(const EdgeSet& edges) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : edges) arr.push_back({e.u + 1, e.v + 1});
  return arr;
}

inline nlohmann::ordered_json modules_json(const ModulePartition& part) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : part.modules) {
    auto ids = nlohmann::ordered_json::array();
    for (NodeId id : m) ids.push_back(id + 1);
    arr.push_back(std::move(ids));
  }
  return arr;
}

}  // namespace detail

/// JSON rendering; module indices and node ids are 1-based.
inline nlohmann::ordered_json report_to_json(const DisconnectorReport& r) {
  using nlohmann::ordered_json;
  ordered_json out;
  out["healthy_modules"] = detail::modules_json(r.healthy_modules);
  out["patient_modules"] = detail::modules_json(r.patient_modules);
  auto splits = ordered_json::array();
  for (const auto& s : r.splits) {
    ordered_json js;
    js["healthy_module"] = s.healthy_module + 1;
    auto pm = ordered_json::array();
    for (auto m : s.patient_modules) pm.push_back(m + 1);
    js["patient_modules"] = std::move(pm);
    auto pairs = ordered_json::array();
    for (const auto& pa : s.pairs) {
      ordered_json jp;
      jp["pair"] = {pa.pair.first + 1, pa.pair.second + 1};
      jp["difference"] = detail::edges_json(pa.difference);
      jp["direct"] = detail::edges_json(pa.direct);
      jp["rejected"] = detail::edges_json(pa.rejected);
      jp["indirect"] = pa.indirect();
      pairs.push_back(std::move(jp));
    }
    js["pairs"] = std::move(pairs);
    js["direct_union"] = detail::edges_json(s.direct_union());
    splits.push_back(std::move(js));
  }
  out["splits"] = std::move(splits);

  auto direct = ordered_json::array();
  for (const auto& [pair, edges] : r.direct()) {
    ordered_json jd;
    jd["pair"] = {pair.first + 1, pair.second + 1};
    jd["edges"] = detail::edges_json(edges);
    direct.push_back(std::move(jd));
  }
  out["direct"] = std::move(direct);
  auto indirect = ordered_json::array();
  for (const auto& pair : r.indirect()) indirect.push_back({pair.first + 1, pair.second + 1});
  out["indirect"] = std::move(indirect);
  out["rejected"] = detail::edges_json(r.rejected_edges());
  out["disconnectors"] = detail::edges_json(r.direct_edges());
  return out;
}

/// Human-readable summary, one block per split healthy module.
inline std::string report_to_text(const DisconnectorReport& r) {
  std::ostringstream out;
  const auto set_text = [](const std::vector<NodeId>& ids) {
    std::string s = "{";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(ids[i] + 1);
    }
    return s + "}";
  };
  const auto edges_text = [](const EdgeSet& edges) {
    std::string s;
    for (const auto& e : edges) {
      if (!s.empty()) s += " ";
      s += to_string(e);
    }
    return s;
  };
  out << "healthy modules: " << r.healthy_modules.size()
      << ", patient modules: " << r.patient_modules.size() << "\n";
  if (r.splits.empty()) {
    out << "no disconnectivity\n";
    return out.str();
  }
  for (const auto& s : r.splits) {
    out << "healthy_module_" << s.healthy_module + 1 << " "
        << set_text(r.healthy_modules.modules[s.healthy_module]) << " spreads into";
    for (std::size_t i = 0; i < s.patient_modules.size(); ++i) {
      const auto m = s.patient_modules[i];
      out << (i ? ", " : " ") << "patient_module_" << m + 1 << " "
          << set_text(r.patient_modules.modules[m]);
    }
    out << "\n";
    for (const auto& pa : s.pairs) {
      out << "  patient_module_" << pa.pair.first + 1 << " / patient_module_"
          << pa.pair.second + 1 << ": ";
      if (pa.indirect()) {
        out << "indirect";
      } else {
        out << "missing " << edges_text(pa.direct);
      }
      if (!pa.rejected.empty()) out << "  [not disconnectors: " << edges_text(pa.rejected) << "]";
      out << "\n";
    }
  }
  out << "missing edges associated with disconnectivity: " << edges_text(r.direct_edges())
      << "\n";
  return out.str();
}

}  // namespace mmflow
