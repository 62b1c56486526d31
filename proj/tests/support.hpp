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

// Fixtures shared by the unit and acceptance tests. Node ids in the
// literals below are 1-based, as in the data files.

#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "mmflow/graph.hpp"
#include "mmflow/rng.hpp"

namespace mmflow::testing {

inline Edge e1(NodeId u, NodeId v) { return Edge(u - 1, v - 1); }

inline EdgeSet edges1(std::initializer_list<std::pair<NodeId, NodeId>> list) {
  EdgeSet out;
  for (const auto& [u, v] : list) out.insert(e1(u, v));
  return out;
}

inline std::vector<std::string> labels(std::initializer_list<std::pair<std::string, int>> runs) {
  std::vector<std::string> out;
  for (const auto& [label, count] : runs) out.insert(out.end(), count, label);
  return out;
}

// Two-modality 8-node example: modules {1..6},{7,8} become
// {1,2,3,5},{4},{6,7,8}.
inline LabeledGraph three_module_healthy() {
  return {labels({{"A", 4}, {"B", 4}}), edges1({{1, 2}, {2, 3}, {2, 5}, {4, 5}, {2, 6}, {7, 8}})};
}
inline LabeledGraph three_module_patient() {
  return {labels({{"A", 4}, {"B", 4}}), edges1({{1, 2}, {2, 3}, {3, 5}, {6, 7}, {7, 8}})};
}

// Three-modality 11-node example with three removals and one addition.
inline LabeledGraph four_module_healthy() {
  return {labels({{"A", 3}, {"B", 4}, {"C", 4}}),
          edges1({{1, 2}, {2, 3}, {3, 6}, {2, 5}, {4, 5}, {5, 9}, {6, 7}, {7, 10}, {10, 11}})};
}
inline LabeledGraph four_module_patient() {
  return {labels({{"A", 3}, {"B", 4}, {"C", 4}}),
          edges1({{1, 2}, {2, 3}, {3, 6}, {4, 5}, {5, 9}, {7, 10}, {8, 9}})};
}

/// Erdos-Renyi graph on p nodes with edge probability q.
inline LabeledGraph random_graph(std::size_t p, double q, Rng& rng) {
  EdgeSet edges;
  for (NodeId i = 0; i < p; ++i) {
    for (NodeId j = i + 1; j < p; ++j) {
      if (rng.bernoulli(q)) edges.insert(Edge(i, j));
    }
  }
  std::vector<std::string> mods(p);
  for (std::size_t i = 0; i < p; ++i) mods[i] = std::string(1, char('A' + i % 3));
  return {std::move(mods), std::move(edges)};
}

/// Removes each edge with probability `drop` and adds `add` random non-edges.
inline LabeledGraph perturb(const LabeledGraph& g, double drop, std::size_t add, Rng& rng) {
  EdgeSet edges;
  for (const auto& e : g.edges()) {
    if (!rng.bernoulli(drop)) edges.insert(e);
  }
  const std::size_t p = g.id_space();
  for (std::size_t k = 0; k < add && p >= 2; ++k) {
    const NodeId u = rng.below(p);
    const NodeId v = rng.below(p);
    if (u != v) edges.insert(Edge(u, v));
  }
  return {g.modalities(), std::move(edges)};
}

}  // namespace mmflow::testing
