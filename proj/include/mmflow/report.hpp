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

// Sweep outputs. records.json holds the raw per-cell results; the CSV and
// aggregate files are rendered from it, so `report` can regenerate them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <charconv>
#include <cstdlib>
#include <map>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/eval.hpp"
#include "mmflow/graph_io.hpp"

namespace mmflow {

/// Shortest text that round-trips the double; +inf as "inf".
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "clean") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw InputError("expected a number, got '" + s + "'");
  }
  if (!j.is_number()) throw InputError("expected a number");
  return j.get<double>();
}

namespace detail {

inline nlohmann::ordered_json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

inline nlohmann::ordered_json quartiles_json(const Quartiles& q) {
  return {{"count", q.count},         {"min", number_json(q.min)},
          {"q1", number_json(q.q1)},  {"median", number_json(q.median)},
          {"q3", number_json(q.q3)},  {"max", number_json(q.max)},
          {"mean", number_json(q.mean)}};
}

}  // namespace detail

inline nlohmann::ordered_json sweep_to_json(const SweepResult& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config_digest"] = r.config_digest;
  j["partial"] = r.partial;
  j["total_failure"] = r.total_failure;
  auto hist = ordered_json::array();
  for (const auto& [count, freq] : r.histogram) hist.push_back({count, freq});
  j["histogram"] = std::move(hist);
  auto recs = ordered_json::array();
  for (const auto& rec : r.records) {
    ordered_json jr;
    jr["snr_db"] = detail::number_json(rec.snr_db);
    auto cells = ordered_json::array();
    for (const auto& c : rec.cells) {
      ordered_json jc;
      jc["graph_id"] = c.graph + 1;
      jc["precision"] = c.score.precision;
      jc["recall"] = c.score.recall;
      jc["f_measure"] = c.score.f_measure;
      jc["true_count"] = c.score.true_count;
      jc["est_count"] = c.score.estimated_count;
      jc["hit_count"] = c.score.hit_count;
      jc["lambda_sparse"] = c.lambda_sparse;
      jc["lambda_joint"] = c.lambda_joint;
      jc["noise_seeds"] = {c.noise_seed_healthy, c.noise_seed_patient};
      jc["error"] = c.error;
      cells.push_back(std::move(jc));
    }
    jr["cells"] = std::move(cells);
    recs.push_back(std::move(jr));
  }
  j["records"] = std::move(recs);
  return j;
}

inline SweepResult sweep_from_json(const nlohmann::json& j) {
  SweepResult r;
  try {
    r.config_digest = j.at("config_digest").get<std::string>();
    r.partial = j.at("partial").get<bool>();
    r.total_failure = j.at("total_failure").get<bool>();
    for (const auto& h : j.at("histogram")) {
      r.histogram[h.at(0).get<std::size_t>()] = h.at(1).get<std::size_t>();
    }
    for (const auto& jr : j.at("records")) {
      SweepRecord rec;
      rec.snr_db = parse_number(jr.at("snr_db"));
      rec.config_digest = r.config_digest;
      for (const auto& jc : jr.at("cells")) {
        CellResult c;
        const auto id = jc.at("graph_id").get<std::size_t>();
        if (id < 1) throw InputError("graph_id must be 1-based");
        c.graph = id - 1;
        c.score.precision = jc.at("precision").get<double>();
        c.score.recall = jc.at("recall").get<double>();
        c.score.f_measure = jc.at("f_measure").get<double>();
        c.score.true_count = jc.at("true_count").get<std::size_t>();
        c.score.estimated_count = jc.at("est_count").get<std::size_t>();
        c.score.hit_count = jc.at("hit_count").get<std::size_t>();
        c.lambda_sparse = jc.at("lambda_sparse").get<double>();
        c.lambda_joint = jc.at("lambda_joint").get<double>();
        c.noise_seed_healthy = jc.at("noise_seeds").at(0).get<std::uint64_t>();
        c.noise_seed_patient = jc.at("noise_seeds").at(1).get<std::uint64_t>();
        c.error = jc.at("error").get<std::string>();
        rec.cells.push_back(std::move(c));
      }
      rec.aggregate();
      r.records.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed sweep records: ") + e.what());
  }
  if (r.records.empty()) throw InputError("sweep records are empty");
  return r;
}

/// Per-cell table, SNR ascending (clean last), graphs in id order.
inline std::string scores_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "snr_db,graph_id,precision,recall,f_measure,true_count,est_count,status\n";
  auto recs = r.records;
  std::stable_sort(recs.begin(), recs.end(),
                   [](const auto& a, const auto& b) { return a.snr_db < b.snr_db; });
  for (const auto& rec : recs) {
    for (const auto& c : rec.cells) {
      out << format_number(rec.snr_db) << ',' << c.graph + 1 << ',';
      if (c.ok()) {
        out << format_number(c.score.precision) << ',' << format_number(c.score.recall) << ','
            << format_number(c.score.f_measure) << ',' << c.score.true_count << ','
            << c.score.estimated_count << ",ok\n";
      } else {
        out << ",,," << c.score.true_count << ",,failed\n";
      }
    }
  }
  return out.str();
}

/// Long format for plotting: one row per (snr, graph, metric).
inline std::string scores_long_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "snr_db,graph_id,metric,value\n";
  auto recs = r.records;
  std::stable_sort(recs.begin(), recs.end(),
                   [](const auto& a, const auto& b) { return a.snr_db < b.snr_db; });
  for (const auto& rec : recs) {
    for (const auto& c : rec.cells) {
      if (!c.ok()) continue;
      const std::string head = format_number(rec.snr_db) + ',' + std::to_string(c.graph + 1) + ',';
      out << head << "precision," << format_number(c.score.precision) << '\n';
      out << head << "recall," << format_number(c.score.recall) << '\n';
      out << head << "f_measure," << format_number(c.score.f_measure) << '\n';
    }
  }
  return out.str();
}

inline nlohmann::ordered_json aggregates_json(const SweepResult& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config_digest"] = r.config_digest;
  j["partial"] = r.partial;
  auto recs = r.records;
  std::stable_sort(recs.begin(), recs.end(),
                   [](const auto& a, const auto& b) { return a.snr_db < b.snr_db; });
  auto arr = ordered_json::array();
  for (const auto& rec : recs) {
    ordered_json jr;
    jr["snr_db"] = detail::number_json(rec.snr_db);
    jr["graphs"] = rec.cells.size();
    jr["failures"] = rec.failures();
    jr["precision"] = detail::quartiles_json(rec.precision);
    jr["recall"] = detail::quartiles_json(rec.recall);
    jr["f_measure"] = detail::quartiles_json(rec.f_measure);
    arr.push_back(std::move(jr));
  }
  j["snr"] = std::move(arr);
  return j;
}

inline std::string histogram_csv(const std::map<std::size_t, std::size_t>& hist) {
  std::ostringstream out;
  out << "true_disconnectors,graphs\n";
  for (const auto& [count, freq] : hist) out << count << ',' << freq << '\n';
  return out.str();
}

/// Writes scores.csv, scores_long.csv, aggregates.json and histogram.csv
/// into `dir`; returns the written paths.
inline std::vector<std::string> write_report(const SweepResult& r, const std::string& dir) {
  if (r.records.empty()) throw InputError("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  std::vector<std::string> written = {path("scores.csv"), path("scores_long.csv"),
                                      path("aggregates.json"), path("histogram.csv")};
  detail::write_file(written[0], scores_csv(r));
  detail::write_file(written[1], scores_long_csv(r));
  detail::write_file(written[2], aggregates_json(r).dump(2) + "\n");
  detail::write_file(written[3], histogram_csv(r.histogram));
  return written;
}

}  // namespace mmflow
