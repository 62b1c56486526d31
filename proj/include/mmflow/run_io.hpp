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

// File plumbing for runs: matrix and sample CSVs with JSON sidecars, and
// the run manifest.

#pragma once

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/graph_io.hpp"
#include "mmflow/hash.hpp"
#include "mmflow/report.hpp"
#include "mmflow/rng.hpp"
#include "mmflow/synth.hpp"

#ifndef MMFLOW_VERSION
#define MMFLOW_VERSION "0.0.0"
#endif

namespace mmflow {

namespace fs = std::filesystem;

/// Writes via a temporary file and rename, so readers never observe a
/// half-written file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  detail::write_file(tmp, content);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

/// Header row n1..np, one row per matrix row.
inline std::string matrix_to_csv(const Matrix& m) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << 'n' << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << '\n';
  }
  return out.str();
}

/// Parses a numeric CSV. A first row that does not parse as numbers is
/// taken as a header.
inline Matrix matrix_from_csv(const std::string& text, const std::string& name = "csv") {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || cell.find_first_not_of(" \t", end - cell.c_str()) != std::string::npos) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;
      throw InputError(name + ":" + std::to_string(line_no) + ": non-numeric value");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(name + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(name + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline std::string sidecar_path(const std::string& csv_path) {
  return (fs::path(csv_path).replace_extension(".json")).string();
}

inline nlohmann::ordered_json sample_sidecar(const SampleSet& s) {
  nlohmann::ordered_json j;
  j["group"] = s.group;
  j["seed"] = s.seed;
  j["snr_db"] = detail::number_json(s.snr_db);
  j["subjects"] = s.data.rows();
  j["nodes"] = s.data.cols();
  j["modalities"] = s.modalities;
  j["rng"] = std::string(kRngAlgorithm);
  return j;
}

/// Writes samples as CSV (rows = subjects) plus a JSON sidecar.
inline std::vector<std::string> save_samples(const SampleSet& s, const std::string& csv_path) {
  detail::write_file(csv_path, matrix_to_csv(s.data));
  detail::write_file(sidecar_path(csv_path), sample_sidecar(s).dump(2) + "\n");
  return {csv_path, sidecar_path(csv_path)};
}

/// Reads a sample CSV; the sidecar is optional and supplies the group name
/// and modality labels (default group: file stem).
inline SampleSet load_samples(const std::string& csv_path) {
  SampleSet s;
  s.data = matrix_from_csv(detail::read_file(csv_path), csv_path);
  s.group = fs::path(csv_path).stem().string();
  const std::string side = sidecar_path(csv_path);
  if (fs::exists(side)) {
    try {
      const auto j = nlohmann::json::parse(detail::read_file(side));
      if (j.contains("group")) s.group = j.at("group").get<std::string>();
      if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
      if (j.contains("snr_db")) s.snr_db = parse_number(j.at("snr_db"));
      if (j.contains("modalities")) {
        s.modalities = j.at("modalities").get<std::vector<std::string>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(side + ": " + e.what());
    }
    if (!s.modalities.empty() && s.modalities.size() != static_cast<std::size_t>(s.data.cols())) {
      throw InputError(side + ": modality count does not match the CSV columns");
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  std::string tool_version = MMFLOW_VERSION;
  std::string config_digest;
  std::uint64_t master_seed = 0;
  nlohmann::ordered_json effective_config = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path relative to run dir, sha256
};

/// Accumulates wall time per named stage.
class StageTimer {
 public:
  explicit StageTimer(RunManifest& m) : manifest_(m) {}
  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    struct Record {
      RunManifest& m;
      std::string stage;
      std::chrono::steady_clock::time_point start;
      ~Record() {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        m.timings.emplace_back(stage, dt.count());
      }
    } rec{manifest_, stage, start};
    return fn();
  }

 private:
  RunManifest& manifest_;
};

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["config_digest"] = m.config_digest;
  j["master_seed"] = m.master_seed;
  j["rng"] = std::string(kRngAlgorithm);
  j["effective_config"] = m.effective_config;
  auto timings = nlohmann::ordered_json::object();
  for (const auto& [stage, sec] : m.timings) timings[stage] = sec;
  j["timings_seconds"] = std::move(timings);
  auto files = [](const auto& list) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : list) arr.push_back({{"path", path}, {"sha256", hash}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  return j;
}

/// Hashes `outputs` (paths relative to run_dir) and writes manifest.json
/// atomically.
inline void write_manifest(RunManifest m, const std::string& run_dir,
                           const std::vector<std::string>& outputs) {
  m.outputs.clear();
  for (const auto& rel : outputs) {
    m.outputs.emplace_back(rel, sha256_file((fs::path(run_dir) / rel).string()));
  }
  write_file_atomic((fs::path(run_dir) / "manifest.json").string(),
                    manifest_to_json(m).dump(2) + "\n");
}

/// Recomputes every recorded output hash; returns the mismatching paths.
inline std::vector<std::string> verify_manifest(const std::string& run_dir) {
  const auto j = nlohmann::json::parse(detail::read_file((fs::path(run_dir) / "manifest.json").string()));
  std::vector<std::string> bad;
  for (const auto& f : j.at("outputs")) {
    const auto rel = f.at("path").get<std::string>();
    const auto path = (fs::path(run_dir) / rel).string();
    if (!fs::exists(path) || sha256_file(path) != f.at("sha256").get<std::string>()) {
      bad.push_back(rel);
    }
  }
  return bad;
}

}  // namespace mmflow
