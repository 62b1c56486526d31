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

// Scoring and simulation orchestration: disconnector precision/recall/F,
// precision-matrix error, and the SNR sweep over block-model ensembles.

#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mmflow/disconnector.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/estimator.hpp"
#include "mmflow/graph.hpp"
#include "mmflow/graph_io.hpp"
#include "mmflow/hash.hpp"
#include "mmflow/rng.hpp"
#include "mmflow/synth.hpp"

namespace mmflow {

// ---------------------------------------------------------------------------
// Scores

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  std::size_t true_count = 0;
  std::size_t estimated_count = 0;
  std::size_t hit_count = 0;
};

/// Precision/recall/F over undirected edges. Conventions for empty sets:
/// both empty scores 1/1/1; an empty estimate against a non-empty truth has
/// precision 0; an empty truth gives recall 0 unless the estimate is empty.
inline Score score_disconnectors(const EdgeSet& estimated, const EdgeSet& truth) {
  Score s;
  s.true_count = truth.size();
  s.estimated_count = estimated.size();
  for (const auto& e : estimated) s.hit_count += truth.count(e);
  if (estimated.empty() && truth.empty()) {
    s.precision = s.recall = s.f_measure = 1.0;
    return s;
  }
  s.precision = estimated.empty() ? 0.0 : double(s.hit_count) / double(estimated.size());
  s.recall = truth.empty() ? 0.0 : double(s.hit_count) / double(truth.size());
  const double sum = s.precision + s.recall;
  s.f_measure = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

/// Mean over all p^2 entries of the squared difference.
inline double precision_mse(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw InputError("matrices differ in shape");
  }
  if (estimate.size() == 0) return 0.0;
  return (estimate - truth).squaredNorm() / static_cast<double>(estimate.size());
}

/// Edge precision/recall of an estimated graph against the generating graph.
inline Score score_edges(const LabeledGraph& estimated, const LabeledGraph& truth) {
  return score_disconnectors(estimated.edges(), truth.edges());
}

// ---------------------------------------------------------------------------
// Configuration

struct PlantSpec {
  /// Explicit edges (1-based on disk) applied to every healthy graph. When
  /// empty, `remove_count` / `add_count` are drawn at random per graph.
  std::vector<Edge> remove_edges;
  std::vector<Edge> add_edges;
  std::size_t remove_count = 3;
  std::size_t add_count = 1;
  bool each_removal_splits = true;
};

struct SimulationConfig {
  std::vector<std::size_t> block_sizes = {3, 3, 11};
  std::vector<double> p_within;  // empty: ln(n)/n per block
  double p_between = 0.01;
  PlantSpec plant;
  double min_precision_eigenvalue = kMinPrecisionEigenvalue;
  std::size_t n_per_group = 1000;
  /// SNR points in dB; +inf is the noise-free point.
  std::vector<double> snr_db = {-20, -15, -10, -5, 0, 5, 10, 15, 20,
                                std::numeric_limits<double>::infinity()};
  std::size_t graphs = 50;
  std::uint64_t master_seed = 1;
  EstimateOptions estimator;
};

namespace detail {

inline nlohmann::ordered_json snr_to_json(double v) {
  if (std::isinf(v) && v > 0) return "clean";
  return v;
}

inline std::string config_field_error(const std::string& field, const std::string& what) {
  return "config field '" + field + "': " + what;
}

template <typename T>
T config_get(const nlohmann::json& doc, const std::string& field, const char* expected) {
  try {
    return doc.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(config_field_error(field, std::string("expected ") + expected));
  }
}

inline std::vector<Edge> config_edges(const nlohmann::json& doc, const std::string& field) {
  if (!doc.is_array()) throw InputError(config_field_error(field, "expected array of [u, v]"));
  std::vector<Edge> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    const auto pair = config_get<std::vector<long long>>(doc[i], f, "[u, v] with 1-based ids");
    if (pair.size() != 2 || pair[0] < 1 || pair[1] < 1 || pair[0] == pair[1]) {
      throw InputError(config_field_error(f, "expected [u, v] with distinct 1-based ids"));
    }
    out.emplace_back(static_cast<NodeId>(pair[0] - 1), static_cast<NodeId>(pair[1] - 1));
  }
  return out;
}

inline void reject_unknown(const nlohmann::json& doc, const std::string& prefix,
                           std::initializer_list<const char*> known) {
  for (const auto& item : doc.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw InputError(config_field_error(prefix + item.key(), "unknown field"));
  }
}

}  // namespace detail

inline nlohmann::ordered_json config_to_json(const SimulationConfig& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["block_sizes"] = c.block_sizes;
  j["p_within"] = c.p_within;
  j["p_between"] = c.p_between;
  ordered_json plant;
  auto edges = [](const std::vector<Edge>& es) {
    auto arr = ordered_json::array();
    for (const auto& e : es) arr.push_back({e.u + 1, e.v + 1});
    return arr;
  };
  plant["remove_edges"] = edges(c.plant.remove_edges);
  plant["add_edges"] = edges(c.plant.add_edges);
  plant["remove_count"] = c.plant.remove_count;
  plant["add_count"] = c.plant.add_count;
  plant["each_removal_splits"] = c.plant.each_removal_splits;
  j["plant"] = std::move(plant);
  j["min_precision_eigenvalue"] = c.min_precision_eigenvalue;
  j["n_per_group"] = c.n_per_group;
  auto snr = ordered_json::array();
  for (double v : c.snr_db) snr.push_back(detail::snr_to_json(v));
  j["snr_db"] = std::move(snr);
  j["graphs"] = c.graphs;
  j["master_seed"] = c.master_seed;
  ordered_json est;
  if (c.estimator.lambda_sparse) {
    est["lambda_sparse"] = *c.estimator.lambda_sparse;
  } else {
    est["lambda_sparse"] = nullptr;
  }
  est["lambda_joint"] = c.estimator.lambda_joint;
  est["alpha"] = c.estimator.alpha;
  est["correction"] = correction_name(c.estimator.correction);
  est["standardize"] = c.estimator.standardize;
  est["grid"] = {{"sparse_points", c.estimator.grid.sparse_points},
                 {"min_ratio", c.estimator.grid.min_ratio},
                 {"joint_ratios", c.estimator.grid.joint_ratios},
                 {"ebic_gamma", c.estimator.grid.ebic_gamma}};
  est["tolerance"] = c.estimator.solver.tolerance;
  est["max_iterations"] = c.estimator.solver.max_iterations;
  j["estimator"] = std::move(est);
  j["rng"] = std::string(kRngAlgorithm);
  return j;
}

/// Parses a simulation config. Missing fields keep their defaults; unknown
/// or ill-typed fields raise InputError naming the field.
inline SimulationConfig config_from_json(const nlohmann::json& doc) {
  using detail::config_get;
  if (!doc.is_object()) throw InputError("config must be a JSON object");
  detail::reject_unknown(doc, "",
                         {"block_sizes", "p_within", "p_between", "plant",
                          "min_precision_eigenvalue", "n_per_group", "snr_db", "graphs",
                          "iterations", "master_seed", "estimator", "rng"});
  SimulationConfig c;
  if (doc.contains("block_sizes")) {
    c.block_sizes = config_get<std::vector<std::size_t>>(doc["block_sizes"], "block_sizes",
                                                         "array of positive integers");
    if (c.block_sizes.empty() ||
        std::any_of(c.block_sizes.begin(), c.block_sizes.end(), [](auto n) { return n == 0; })) {
      throw InputError(detail::config_field_error("block_sizes", "expected positive sizes"));
    }
  }
  if (doc.contains("p_within")) {
    c.p_within = config_get<std::vector<double>>(doc["p_within"], "p_within", "array of numbers");
    if (!c.p_within.empty() && c.p_within.size() != c.block_sizes.size()) {
      throw InputError(detail::config_field_error("p_within", "needs one value per block"));
    }
    for (double p : c.p_within) {
      if (!(p >= 0 && p <= 1)) throw InputError(detail::config_field_error("p_within", "outside [0,1]"));
    }
  }
  if (doc.contains("p_between")) {
    c.p_between = config_get<double>(doc["p_between"], "p_between", "number");
    if (!(c.p_between >= 0 && c.p_between <= 1)) {
      throw InputError(detail::config_field_error("p_between", "outside [0,1]"));
    }
  }
  if (doc.contains("plant")) {
    const auto& pl = doc["plant"];
    if (!pl.is_object()) throw InputError(detail::config_field_error("plant", "expected object"));
    detail::reject_unknown(pl, "plant.",
                           {"remove_edges", "add_edges", "remove_count", "add_count",
                            "each_removal_splits"});
    if (pl.contains("remove_edges")) {
      c.plant.remove_edges = detail::config_edges(pl["remove_edges"], "plant.remove_edges");
    }
    if (pl.contains("add_edges")) {
      c.plant.add_edges = detail::config_edges(pl["add_edges"], "plant.add_edges");
    }
    if (pl.contains("remove_count")) {
      c.plant.remove_count = config_get<std::size_t>(pl["remove_count"], "plant.remove_count",
                                                     "non-negative integer");
    }
    if (pl.contains("add_count")) {
      c.plant.add_count =
          config_get<std::size_t>(pl["add_count"], "plant.add_count", "non-negative integer");
    }
    if (pl.contains("each_removal_splits")) {
      c.plant.each_removal_splits =
          config_get<bool>(pl["each_removal_splits"], "plant.each_removal_splits", "boolean");
    }
  }
  if (doc.contains("min_precision_eigenvalue")) {
    c.min_precision_eigenvalue = config_get<double>(doc["min_precision_eigenvalue"],
                                                    "min_precision_eigenvalue", "number");
    if (!(c.min_precision_eigenvalue > 0 && c.min_precision_eigenvalue < 1)) {
      throw InputError(detail::config_field_error("min_precision_eigenvalue", "outside (0,1)"));
    }
  }
  if (doc.contains("n_per_group")) {
    c.n_per_group = config_get<std::size_t>(doc["n_per_group"], "n_per_group", "positive integer");
    if (c.n_per_group < 1) throw InputError(detail::config_field_error("n_per_group", "must be >= 1"));
  }
  if (doc.contains("snr_db")) {
    const auto& arr = doc["snr_db"];
    if (!arr.is_array() || arr.empty()) {
      throw InputError(detail::config_field_error("snr_db", "expected non-empty array"));
    }
    c.snr_db.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string f = "snr_db[" + std::to_string(i) + "]";
      if (arr[i].is_string() && arr[i].get<std::string>() == "clean") {
        c.snr_db.push_back(std::numeric_limits<double>::infinity());
      } else if (arr[i].is_number()) {
        c.snr_db.push_back(arr[i].get<double>());
      } else {
        throw InputError(detail::config_field_error(f, "expected number or \"clean\""));
      }
    }
  }
  for (const char* key : {"graphs", "iterations"}) {
    if (doc.contains(key)) {
      c.graphs = config_get<std::size_t>(doc[key], key, "positive integer");
      if (c.graphs < 1) throw InputError(detail::config_field_error(key, "must be >= 1"));
    }
  }
  if (doc.contains("master_seed")) {
    c.master_seed = config_get<std::uint64_t>(doc["master_seed"], "master_seed", "unsigned integer");
  }
  if (doc.contains("estimator")) {
    const auto& e = doc["estimator"];
    if (!e.is_object()) throw InputError(detail::config_field_error("estimator", "expected object"));
    detail::reject_unknown(e, "estimator.",
                           {"lambda_sparse", "lambda_joint", "alpha", "correction", "standardize",
                            "grid", "tolerance", "max_iterations"});
    auto& est = c.estimator;
    if (e.contains("lambda_sparse") && !e["lambda_sparse"].is_null()) {
      est.lambda_sparse = config_get<double>(e["lambda_sparse"], "estimator.lambda_sparse", "number");
    }
    if (e.contains("lambda_joint")) {
      est.lambda_joint = config_get<double>(e["lambda_joint"], "estimator.lambda_joint", "number");
    }
    if (e.contains("alpha")) {
      est.alpha = config_get<double>(e["alpha"], "estimator.alpha", "number");
      if (!(est.alpha > 0 && est.alpha <= 1)) {
        throw InputError(detail::config_field_error("estimator.alpha", "outside (0,1]"));
      }
    }
    if (e.contains("correction")) {
      try {
        est.correction = parse_correction(
            config_get<std::string>(e["correction"], "estimator.correction", "string"));
      } catch (const InputError& err) {
        throw InputError(detail::config_field_error("estimator.correction", err.what()));
      }
    }
    if (e.contains("standardize")) {
      est.standardize = config_get<bool>(e["standardize"], "estimator.standardize", "boolean");
    }
    if (e.contains("grid")) {
      const auto& g = e["grid"];
      detail::reject_unknown(g, "estimator.grid.",
                             {"sparse_points", "min_ratio", "joint_ratios", "ebic_gamma"});
      if (g.contains("sparse_points")) {
        est.grid.sparse_points = config_get<int>(g["sparse_points"], "estimator.grid.sparse_points", "integer");
      }
      if (g.contains("min_ratio")) {
        est.grid.min_ratio = config_get<double>(g["min_ratio"], "estimator.grid.min_ratio", "number");
      }
      if (g.contains("joint_ratios")) {
        est.grid.joint_ratios = config_get<std::vector<double>>(
            g["joint_ratios"], "estimator.grid.joint_ratios", "array of numbers");
      }
      if (g.contains("ebic_gamma")) {
        est.grid.ebic_gamma = config_get<double>(g["ebic_gamma"], "estimator.grid.ebic_gamma", "number");
      }
    }
    if (e.contains("tolerance")) {
      est.solver.tolerance = config_get<double>(e["tolerance"], "estimator.tolerance", "number");
    }
    if (e.contains("max_iterations")) {
      est.solver.max_iterations =
          config_get<int>(e["max_iterations"], "estimator.max_iterations", "integer");
    }
  }
  return c;
}

inline SimulationConfig load_config(const std::string& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

/// SHA-256 of the canonical config serialization.
inline std::string config_digest(const SimulationConfig& c) {
  return sha256_hex(config_to_json(c).dump());
}

// ---------------------------------------------------------------------------
// Ensemble generation

/// One fixed healthy/patient pair with its models, ground truth and
/// noise-free samples.
struct GraphCase {
  std::size_t index = 0;
  LabeledGraph healthy;
  LabeledGraph patient;
  PlantConfig plant;
  CovModel healthy_model;
  CovModel patient_model;
  EdgeSet truth;
  SampleSet healthy_samples;
  SampleSet patient_samples;
  std::uint64_t graph_seed = 0;
  int attempts = 0;
};

/// Deterministic for (config, index). Draws a block-model graph, plants
/// disconnectivity, builds both Gaussian models and samples each group;
/// any failed stage redraws the graph under the next attempt sub-seed.
inline GraphCase make_graph_case(const SimulationConfig& cfg, std::size_t index,
                                 int max_attempts = 1000) {
  const std::uint64_t ms = cfg.master_seed;
  std::string last_error;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const auto a = static_cast<std::uint64_t>(attempt);
    GraphCase gc;
    gc.index = index;
    gc.attempts = attempt + 1;
    try {
      SbmConfig sbm;
      sbm.block_sizes = cfg.block_sizes;
      sbm.p_within = cfg.p_within;
      sbm.p_between = cfg.p_between;
      sbm.seed = gc.graph_seed = derive_seed(ms, "graph", {index, a});
      gc.healthy = generate_sbm(sbm);
      if (cfg.plant.remove_edges.empty() && cfg.plant.add_edges.empty()) {
        gc.plant = random_plant(gc.healthy, cfg.plant.remove_count, cfg.plant.add_count,
                                derive_seed(ms, "plant", {index, a}),
                                cfg.plant.each_removal_splits);
      } else {
        gc.plant = {cfg.plant.remove_edges, cfg.plant.add_edges};
      }
      gc.patient = plant_disconnectivity(gc.healthy, gc.plant);
      gc.truth = disconnector_oracle(gc.healthy, gc.patient);
      auto models = group_models(gc.healthy, gc.patient, derive_seed(ms, "pcorr", {index, a}),
                                 cfg.min_precision_eigenvalue);
      gc.healthy_model = std::move(models.first);
      gc.patient_model = std::move(models.second);
    } catch (const NumericalError& e) {
      last_error = e.what();
      continue;
    } catch (const InputError& e) {
      // Explicit plant specs that do not fit this graph: redraw.
      last_error = e.what();
      continue;
    }
    gc.healthy_samples = sample_gaussian(gc.healthy_model, cfg.n_per_group,
                                         derive_seed(ms, "samples", {index, 0}), "healthy");
    gc.patient_samples = sample_gaussian(gc.patient_model, cfg.n_per_group,
                                         derive_seed(ms, "samples", {index, 1}), "patient");
    gc.healthy_samples.modalities = gc.healthy.modalities();
    gc.patient_samples.modalities = gc.patient.modalities();
    return gc;
  }
  throw NumericalError("graph " + std::to_string(index + 1) + ": no valid draw after " +
                       std::to_string(max_attempts) + " attempts (" + last_error + ")");
}

/// Frequency of each true-disconnector count across the ensemble.
inline std::map<std::size_t, std::size_t> disconnector_histogram(
    const std::vector<GraphCase>& cases) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& gc : cases) ++hist[gc.truth.size()];
  return hist;
}

/// Runs fn(0..count-1) on `jobs` threads. Results must be written to
/// per-index slots; the first exception is rethrown.
inline void parallel_for(std::size_t count, std::size_t jobs,
                         const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::vector<GraphCase> make_ensemble(const SimulationConfig& cfg, std::size_t jobs = 1) {
  std::vector<GraphCase> cases(cfg.graphs);
  parallel_for(cfg.graphs, jobs, [&](std::size_t i) { cases[i] = make_graph_case(cfg, i); });
  return cases;
}

// ---------------------------------------------------------------------------
// Sweep

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
  std::size_t count = 0;
};

/// Linear-interpolation quantiles (the common "type 7" definition).
inline Quartiles quartiles(std::vector<double> values) {
  Quartiles q;
  q.count = values.size();
  if (values.empty()) {
    q.min = q.q1 = q.median = q.q3 = q.max = q.mean = std::numeric_limits<double>::quiet_NaN();
    return q;
  }
  std::sort(values.begin(), values.end());
  const auto at = [&](double prob) {
    const double h = (values.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - lo) * (values[hi] - values[lo]);
  };
  q.min = values.front();
  q.max = values.back();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  double sum = 0;
  for (double v : values) sum += v;
  q.mean = sum / values.size();
  return q;
}

struct CellResult {
  std::size_t graph = 0;
  Score score;
  /// Empty on success.
  std::string error;
  std::uint64_t noise_seed_healthy = 0;
  std::uint64_t noise_seed_patient = 0;
  double lambda_sparse = 0;
  double lambda_joint = 0;

  bool ok() const { return error.empty(); }
};

struct SweepRecord {
  double snr_db = 0;
  std::vector<CellResult> cells;
  Quartiles precision, recall, f_measure;
  std::string config_digest;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok(); }));
  }

  /// Recomputes the aggregates from the per-graph scores of successful cells.
  void aggregate() {
    std::vector<double> p, r, f;
    for (const auto& c : cells) {
      if (!c.ok()) continue;
      p.push_back(c.score.precision);
      r.push_back(c.score.recall);
      f.push_back(c.score.f_measure);
    }
    precision = quartiles(p);
    recall = quartiles(r);
    f_measure = quartiles(f);
  }
};

struct SweepResult {
  std::string config_digest;
  std::vector<SweepRecord> records;
  std::map<std::size_t, std::size_t> histogram;
  /// Some SNR point failed on every graph.
  bool partial = false;
  /// Every cell failed.
  bool total_failure = false;
};

inline std::uint64_t snr_key(double snr_db) { return std::bit_cast<std::uint64_t>(snr_db); }

/// Scores one (graph, SNR) cell: noise, joint estimation, significance
/// adjacency, disconnector search on the estimated graphs, and comparison
/// with the ground truth of the fixed graphs.
inline CellResult run_cell(const SimulationConfig& cfg, const GraphCase& gc, double snr_db) {
  CellResult cell;
  cell.graph = gc.index;
  cell.noise_seed_healthy = derive_seed(cfg.master_seed, "noise", {gc.index, snr_key(snr_db), 0});
  cell.noise_seed_patient = derive_seed(cfg.master_seed, "noise", {gc.index, snr_key(snr_db), 1});
  try {
    auto h = add_noise_for_snr(gc.healthy_samples, snr_db, cell.noise_seed_healthy);
    auto p = add_noise_for_snr(gc.patient_samples, snr_db, cell.noise_seed_patient);
    const auto est = estimate_group_graphs({h, p}, cfg.estimator);
    cell.lambda_sparse = est.precisions.lambda_sparse;
    cell.lambda_joint = est.precisions.lambda_joint;
    const auto found = find_disconnectors(est.graphs[0], est.graphs[1]).direct_edges();
    cell.score = score_disconnectors(found, gc.truth);
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

/// SNR points in ascending order, +inf (clean) last.
inline std::vector<double> sorted_snr(std::vector<double> snr) {
  std::sort(snr.begin(), snr.end());
  snr.erase(std::unique(snr.begin(), snr.end()), snr.end());
  return snr;
}

/// Fixed graphs and truths are generated once and reused at every SNR
/// point; cells run on `jobs` threads and are reduced in (SNR, graph) order.
inline SweepResult run_snr_sweep(const SimulationConfig& cfg, std::size_t jobs = 1,
                                 const std::vector<GraphCase>* cached = nullptr) {
  SweepResult out;
  out.config_digest = config_digest(cfg);
  std::vector<GraphCase> local;
  if (!cached) local = make_ensemble(cfg, jobs);
  const auto& cases = cached ? *cached : local;
  if (cases.size() != cfg.graphs) throw InputError("cached ensemble does not match the config");
  out.histogram = disconnector_histogram(cases);

  const auto snr = sorted_snr(cfg.snr_db);
  std::vector<CellResult> cells(snr.size() * cases.size());
  parallel_for(cells.size(), jobs, [&](std::size_t k) {
    cells[k] = run_cell(cfg, cases[k % cases.size()], snr[k / cases.size()]);
  });
  std::size_t failed = 0;
  for (std::size_t s = 0; s < snr.size(); ++s) {
    SweepRecord rec;
    rec.snr_db = snr[s];
    rec.config_digest = out.config_digest;
    rec.cells.assign(cells.begin() + s * cases.size(), cells.begin() + (s + 1) * cases.size());
    rec.aggregate();
    failed += rec.failures();
    if (rec.failures() == rec.cells.size()) out.partial = true;
    out.records.push_back(std::move(rec));
  }
  out.total_failure = failed == cells.size();
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-graph recovery study

struct RecoveryReplicate {
  double mse = 0;  // mean of both groups' per-entry MSE
  Score healthy_edges;
  Score patient_edges;
  EdgeSet disconnectors;
};

/// Repeatedly draws models and samples for one fixed healthy/patient pair,
/// estimates both group graphs, and scores precision-matrix error and
/// edge recovery. No noise is added.
inline std::vector<RecoveryReplicate> recovery_study(const LabeledGraph& healthy,
                                                     const LabeledGraph& patient,
                                                     std::size_t replicates, std::size_t n,
                                                     std::uint64_t seed,
                                                     const EstimateOptions& opt,
                                                     double min_eigenvalue = kMinPrecisionEigenvalue) {
  std::vector<RecoveryReplicate> out;
  for (std::size_t r = 0; r < replicates; ++r) {
    const auto models = group_models(healthy, patient, derive_seed(seed, "pcorr", {r}), min_eigenvalue);
    auto h = sample_gaussian(models.first, n, derive_seed(seed, "samples", {r, 0}), "healthy");
    auto p = sample_gaussian(models.second, n, derive_seed(seed, "samples", {r, 1}), "patient");
    h.modalities = healthy.modalities();
    p.modalities = patient.modalities();
    const auto est = estimate_group_graphs({h, p}, opt);
    RecoveryReplicate rep;
    rep.mse = 0.5 * (precision_mse(est.precisions.precision[0], models.first.precision) +
                     precision_mse(est.precisions.precision[1], models.second.precision));
    rep.healthy_edges = score_edges(est.graphs[0], healthy);
    rep.patient_edges = score_edges(est.graphs[1], patient);
    rep.disconnectors = find_disconnectors(est.graphs[0], est.graphs[1]).direct_edges();
    out.push_back(std::move(rep));
  }
  return out;
}

}  // namespace mmflow
