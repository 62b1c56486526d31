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

// Graph file formats. All ids on disk are 1-based.
//
//   JSON:       {"nodes":[{"id":1,"modality":"A"},...],"edges":[[1,2],...]}
//   Edge list:  one "u v" pair per line ('#' comments allowed), plus a
//               sidecar modality map with one "id modality" pair per line.
//
// A third edge column (a weight) is ignored with a warning.

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/graph.hpp"

namespace mmflow {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline NodeId parse_one_based(long long id, std::size_t id_space) {
  if (id < 1 || static_cast<std::size_t>(id) > id_space) {
    throw InputError("node id " + std::to_string(id) + " out of range 1.." +
                     std::to_string(id_space));
  }
  return static_cast<NodeId>(id - 1);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace detail

inline ordered_json graph_to_json(const LabeledGraph& g) {
  ordered_json nodes = ordered_json::array();
  for (NodeId id : g.nodes()) {
    nodes.push_back({{"id", id + 1}, {"modality", g.modality(id)}});
  }
  ordered_json edges = ordered_json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u + 1, e.v + 1});
  ordered_json out;
  out["nodes"] = std::move(nodes);
  out["edges"] = std::move(edges);
  return out;
}

/// Parses the JSON graph format. The id space is the largest node id; ids
/// without a node entry are absent from the graph and must carry no edges.
inline LabeledGraph graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw InputError("graph JSON needs a \"nodes\" array");
  }
  std::map<long long, std::string> labels;
  for (const auto& node : doc["nodes"]) {
    if (!node.contains("id") || !node["id"].is_number_integer()) {
      throw InputError("graph node without integer \"id\"");
    }
    const long long id = node["id"].get<long long>();
    if (id < 1) throw InputError("node ids are 1-based; got " + std::to_string(id));
    std::string modality = node.value("modality", std::string());
    if (modality.empty()) {
      throw InputError("node " + std::to_string(id) + " has no modality");
    }
    if (!labels.emplace(id, std::move(modality)).second) {
      throw InputError("duplicate node id " + std::to_string(id));
    }
  }
  const std::size_t id_space = labels.empty() ? 0 : labels.rbegin()->first;
  std::vector<std::string> modalities(id_space, "?");
  std::vector<NodeId> present;
  for (const auto& [id, label] : labels) {
    modalities[id - 1] = label;
    present.push_back(static_cast<NodeId>(id - 1));
  }
  EdgeSet edges;
  bool weighted = false;
  if (doc.contains("edges")) {
    for (const auto& pair : doc["edges"]) {
      if (!pair.is_array() || pair.size() < 2) {
        throw InputError("edges must be [u, v] arrays");
      }
      if (pair.size() > 2) weighted = true;
      const NodeId a = detail::parse_one_based(pair[0].get<long long>(), id_space);
      const NodeId b = detail::parse_one_based(pair[1].get<long long>(), id_space);
      edges.insert(Edge(a, b));
    }
  }
  if (weighted) warn("edge weights ignored; graphs are unweighted");
  if (present.size() == id_space) {
    return LabeledGraph(std::move(modalities), std::move(edges));
  }
  return LabeledGraph(std::move(modalities), std::move(present), std::move(edges));
}

/// Canonical serialization: nodes by id, edges lexicographic.
inline std::string serialize_graph(const LabeledGraph& g) {
  return graph_to_json(g).dump(2) + "\n";
}

inline LabeledGraph parse_graph(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("graph JSON: ") + e.what());
  }
  return graph_from_json(doc);
}

/// Edge list + sidecar modality map. Every id in the modality map is a node.
inline LabeledGraph parse_edge_list(const std::string& edge_text,
                                    const std::string& modality_text) {
  std::map<long long, std::string> labels;
  {
    std::istringstream in(modality_text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      long long id = 0;
      std::string label;
      if (!(fields >> id >> label)) {
        throw InputError("bad modality line: '" + line + "'");
      }
      if (id < 1) throw InputError("node ids are 1-based; got " + std::to_string(id));
      labels[id] = label;
    }
  }
  const std::size_t id_space = labels.empty() ? 0 : labels.rbegin()->first;
  std::vector<std::string> modalities(id_space, "?");
  std::vector<NodeId> present;
  for (const auto& [id, label] : labels) {
    modalities[id - 1] = label;
    present.push_back(static_cast<NodeId>(id - 1));
  }
  EdgeSet edges;
  bool weighted = false;
  std::istringstream in(edge_text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    long long a = 0, b = 0;
    if (!(fields >> a >> b)) throw InputError("bad edge line: '" + line + "'");
    std::string rest;
    if (fields >> rest) weighted = true;
    edges.insert(Edge(detail::parse_one_based(a, id_space),
                      detail::parse_one_based(b, id_space)));
  }
  if (weighted) warn("edge weights ignored; graphs are unweighted");
  if (present.size() == id_space) {
    return LabeledGraph(std::move(modalities), std::move(edges));
  }
  return LabeledGraph(std::move(modalities), std::move(present), std::move(edges));
}

/// Loads a graph file; `.json` uses the JSON format, anything else is read
/// as an edge list with a sidecar at `<path>.modalities` unless given.
inline LabeledGraph load_graph(const std::string& path,
                               const std::string& modality_path = {}) {
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) return parse_graph(detail::read_file(path));
  const std::string sidecar = modality_path.empty() ? path + ".modalities" : modality_path;
  return parse_edge_list(detail::read_file(path), detail::read_file(sidecar));
}

inline void save_graph(const LabeledGraph& g, const std::string& path) {
  detail::write_file(path, serialize_graph(g));
}

}  // namespace mmflow
