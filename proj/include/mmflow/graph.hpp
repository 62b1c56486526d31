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

#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <deque>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mmflow/errors.hpp"

namespace mmflow {

/// Zero-based node identifier. File formats and reports use 1-based ids.
using NodeId = std::size_t;

/// Undirected edge stored canonically with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  constexpr Edge() = default;
  Edge(NodeId a, NodeId b) : u(std::min(a, b)), v(std::max(a, b)) {
    if (a == b) {
      throw InputError("self-loop on node " + std::to_string(a + 1));
    }
  }

  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
  friend constexpr bool operator==(const Edge&, const Edge&) = default;
};

using EdgeSet = std::set<Edge>;

/// Renders an edge with 1-based ids, e.g. "(4,5)".
inline std::string to_string(const Edge& e) {
  return "(" + std::to_string(e.u + 1) + "," + std::to_string(e.v + 1) + ")";
}

/// Simple undirected graph over the id space [0, id_space). Every node
/// present carries exactly one modality label. A graph produced by
/// induced_subgraph keeps the id space of its parent but only a subset of
/// nodes.
class LabeledGraph {
 public:
  LabeledGraph() = default;

  /// Full graph: nodes are 0..p-1, labelled by `modalities`.
  LabeledGraph(std::vector<std::string> modalities, EdgeSet edges)
      : modalities_(std::move(modalities)), edges_(std::move(edges)) {
    nodes_.resize(modalities_.size());
    for (NodeId i = 0; i < nodes_.size(); ++i) nodes_[i] = i;
    validate();
  }

  /// Graph restricted to `nodes` within an id space of modalities.size().
  LabeledGraph(std::vector<std::string> modalities, std::vector<NodeId> nodes,
               EdgeSet edges)
      : modalities_(std::move(modalities)),
        nodes_(std::move(nodes)),
        edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end());
    nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
    validate();
  }

  /// Size of the id space (p for a full graph).
  std::size_t id_space() const { return modalities_.size(); }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const EdgeSet& edges() const { return edges_; }
  const std::vector<std::string>& modalities() const { return modalities_; }
  const std::string& modality(NodeId id) const { return modalities_.at(id); }

  bool contains(NodeId id) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), id);
  }
  bool has_edge(NodeId a, NodeId b) const {
    return a != b && edges_.count(Edge(a, b)) > 0;
  }

  /// Adjacency lists indexed by id; absent nodes get empty lists.
  std::vector<std::vector<NodeId>> adjacency() const {
    std::vector<std::vector<NodeId>> adj(id_space());
    for (const auto& e : edges_) {
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    return adj;
  }

  friend bool operator==(const LabeledGraph&, const LabeledGraph&) = default;

 private:
  void validate() const {
    for (const auto& m : modalities_) {
      if (m.empty()) throw InputError("empty modality label");
    }
    if (!nodes_.empty() && nodes_.back() >= id_space()) {
      throw InputError("node id " + std::to_string(nodes_.back() + 1) +
                       " outside id space of " + std::to_string(id_space()));
    }
    for (const auto& e : edges_) {
      if (!contains(e.u) || !contains(e.v)) {
        throw InputError("edge " + to_string(e) +
                         " has an endpoint that is not a node of the graph");
      }
    }
  }

  std::vector<std::string> modalities_;
  std::vector<NodeId> nodes_;
  EdgeSet edges_;
};

/// Partition of a graph's nodes into modules (connected components).
/// Modules are sorted internally and ordered by their smallest member.
struct ModulePartition {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::vector<std::vector<NodeId>> modules;
  /// Module index per id; npos for ids not present in the source graph.
  std::vector<std::size_t> node_to_module;

  std::size_t size() const { return modules.size(); }
  std::size_t module_of(NodeId id) const { return node_to_module.at(id); }

  friend bool operator==(const ModulePartition&,
                         const ModulePartition&) = default;
};

/// Maximal connected node sets of `g`, found by breadth-first search from
/// the smallest unvisited id.
inline ModulePartition connected_components(const LabeledGraph& g) {
  ModulePartition part;
  part.node_to_module.assign(g.id_space(), ModulePartition::npos);
  const auto adj = g.adjacency();
  std::deque<NodeId> queue;
  for (NodeId start : g.nodes()) {
    if (part.node_to_module[start] != ModulePartition::npos) continue;
    const std::size_t index = part.modules.size();
    std::vector<NodeId> members;
    part.node_to_module[start] = index;
    queue.push_back(start);
    while (!queue.empty()) {
      const NodeId x = queue.front();
      queue.pop_front();
      members.push_back(x);
      for (NodeId y : adj[x]) {
        if (part.node_to_module[y] == ModulePartition::npos) {
          part.node_to_module[y] = index;
          queue.push_back(y);
        }
      }
    }
    std::sort(members.begin(), members.end());
    part.modules.push_back(std::move(members));
  }
  return part;
}

/// Subgraph on `nodes` keeping every edge of `g` whose endpoints both lie in
/// `nodes`. Ids and the id space are preserved.
inline LabeledGraph induced_subgraph(const LabeledGraph& g,
                                     const std::vector<NodeId>& nodes) {
  std::vector<NodeId> keep(nodes);
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  for (NodeId id : keep) {
    if (!g.contains(id)) {
      throw InputError("node " + std::to_string(id + 1) +
                       " is not a node of the graph");
    }
  }
  const auto in_keep = [&](NodeId id) {
    return std::binary_search(keep.begin(), keep.end(), id);
  };
  EdgeSet edges;
  for (const auto& e : g.edges()) {
    if (in_keep(e.u) && in_keep(e.v)) edges.insert(e);
  }
  return LabeledGraph(g.modalities(), std::move(keep), std::move(edges));
}

inline LabeledGraph induced_subgraph(const LabeledGraph& g,
                                     const std::set<NodeId>& nodes) {
  return induced_subgraph(g, std::vector<NodeId>(nodes.begin(), nodes.end()));
}

/// E(a) \ E(b). Both graphs must share an id space.
inline EdgeSet edge_difference(const LabeledGraph& a, const LabeledGraph& b) {
  if (a.id_space() != b.id_space()) {
    throw InputError("graphs have different node counts (" +
                     std::to_string(a.id_space()) + " vs " +
                     std::to_string(b.id_space()) + ")");
  }
  EdgeSet out;
  std::set_difference(a.edges().begin(), a.edges().end(), b.edges().begin(),
                      b.edges().end(), std::inserter(out, out.end()));
  return out;
}

/// Throws unless both graphs live on the same id space with the same labels.
inline void require_same_node_space(const LabeledGraph& a,
                                    const LabeledGraph& b) {
  if (a.id_space() != b.id_space() || a.nodes() != b.nodes()) {
    throw InputError("graphs are defined over different node sets (" +
                     std::to_string(a.node_count()) + " vs " +
                     std::to_string(b.node_count()) + " nodes)");
  }
  if (a.modalities() != b.modalities()) {
    throw InputError("graphs disagree on node modality labels");
  }
}

}  // namespace mmflow
