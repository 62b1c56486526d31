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

// Synthetic ground truth: block-model graphs, planted patient-graph
// disconnectivity, graph-structured Gaussian models, sampling and noise.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmflow/disconnector.hpp"
#include "mmflow/errors.hpp"
#include "mmflow/graph.hpp"
#include "mmflow/rng.hpp"

namespace mmflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Half-width of the band around zero used for non-edge partial correlations.
inline constexpr double kNearZeroBand = 1e-4;

/// Floor on the smallest eigenvalue of generated precision matrices.
inline constexpr double kMinPrecisionEigenvalue = 0.1;

// ---------------------------------------------------------------------------
// Block model

struct SbmConfig {
  std::vector<std::size_t> block_sizes = {3, 3, 11};
  /// Per-block within probability; empty means ln(n)/n for a block of size n.
  std::vector<double> p_within;
  double p_between = 0.01;
  std::uint64_t seed = 0;
};

inline double default_within_probability(std::size_t block_size) {
  if (block_size < 2) return 0.0;
  const double n = static_cast<double>(block_size);
  return std::log(n) / n;
}

/// "A", "B", ... for the first 26 blocks, then "M27", "M28", ...
inline std::string block_label(std::size_t block) {
  if (block < 26) return std::string(1, static_cast<char>('A' + block));
  return "M" + std::to_string(block + 1);
}

inline std::vector<double> effective_within(const SbmConfig& cfg) {
  if (cfg.block_sizes.empty()) throw InputError("block_sizes must be non-empty");
  std::vector<double> within = cfg.p_within;
  if (within.empty()) {
    for (auto n : cfg.block_sizes) within.push_back(default_within_probability(n));
  }
  if (within.size() != cfg.block_sizes.size()) {
    throw InputError("p_within needs one probability per block");
  }
  for (double p : within) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("p_within outside [0,1]");
  }
  if (!(cfg.p_between >= 0.0 && cfg.p_between <= 1.0)) {
    throw InputError("p_between outside [0,1]");
  }
  for (auto n : cfg.block_sizes) {
    if (n == 0) throw InputError("block sizes must be positive");
  }
  return within;
}

/// Every node pair gets an independent edge draw: within-block pairs with
/// their block's probability, cross-block pairs with p_between. Block i
/// becomes modality block_label(i).
inline LabeledGraph generate_sbm(const SbmConfig& cfg) {
  const auto within = effective_within(cfg);
  std::vector<std::size_t> block_of;
  std::vector<std::string> modalities;
  for (std::size_t b = 0; b < cfg.block_sizes.size(); ++b) {
    for (std::size_t k = 0; k < cfg.block_sizes[b]; ++k) {
      block_of.push_back(b);
      modalities.push_back(block_label(b));
    }
  }
  Rng rng(cfg.seed);
  EdgeSet edges;
  const std::size_t p = block_of.size();
  for (NodeId i = 0; i < p; ++i) {
    for (NodeId j = i + 1; j < p; ++j) {
      const double prob = block_of[i] == block_of[j] ? within[block_of[i]] : cfg.p_between;
      if (rng.bernoulli(prob)) edges.insert(Edge(i, j));
    }
  }
  return LabeledGraph(std::move(modalities), std::move(edges));
}

// ---------------------------------------------------------------------------
// Planted disconnectivity

struct PlantConfig {
  std::vector<Edge> remove_edges;
  std::vector<Edge> add_edges;
};

inline LabeledGraph plant_disconnectivity(const LabeledGraph& healthy,
                                          const PlantConfig& cfg) {
  EdgeSet edges = healthy.edges();
  EdgeSet removed(cfg.remove_edges.begin(), cfg.remove_edges.end());
  for (const auto& e : cfg.add_edges) {
    if (removed.count(e)) {
      throw InputError("edge " + to_string(e) + " is both removed and added");
    }
  }
  for (const auto& e : removed) {
    if (!edges.erase(e)) {
      throw InputError("cannot remove " + to_string(e) + ": not in the healthy graph");
    }
  }
  for (const auto& e : cfg.add_edges) {
    if (healthy.edges().count(e)) {
      throw InputError("cannot add " + to_string(e) + ": already in the healthy graph");
    }
    if (!healthy.contains(e.u) || !healthy.contains(e.v)) {
      throw InputError("cannot add " + to_string(e) + ": endpoint outside the graph");
    }
    edges.insert(e);
  }
  return LabeledGraph(healthy.modalities(), healthy.nodes(), std::move(edges));
}

/// Randomized planting: removes `remove_count` uniformly chosen healthy edges
/// and adds `add_count` uniformly chosen non-edges. With `each_removal_splits`
/// every removed edge must disconnect its endpoints once all removals are
/// applied (as in the worked examples, where each missing link is a
/// disconnector); otherwise at least one healthy module must split. Draws are
/// retried up to `max_attempts` times; on failure throws NumericalError and
/// callers draw a new healthy graph.
inline PlantConfig random_plant(const LabeledGraph& healthy, std::size_t remove_count,
                                std::size_t add_count, std::uint64_t seed,
                                bool each_removal_splits = true, int max_attempts = 200) {
  const std::vector<Edge> present(healthy.edges().begin(), healthy.edges().end());
  std::vector<Edge> absent;
  const auto& nodes = healthy.nodes();
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      if (!healthy.has_edge(nodes[a], nodes[b])) absent.emplace_back(nodes[a], nodes[b]);
    }
  }
  if (remove_count == 0 || present.size() < remove_count || absent.size() < add_count) {
    throw NumericalError("graph has too few edges to plant " +
                         std::to_string(remove_count) + " removals");
  }
  Rng rng(seed);
  const auto choose = [&rng](std::vector<Edge> pool, std::size_t k) {
    // Partial Fisher-Yates; result sorted for canonical output.
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  };
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    PlantConfig cfg;
    cfg.remove_edges = choose(present, remove_count);
    cfg.add_edges = choose(absent, add_count);
    if (each_removal_splits) {
      const auto removed_only = plant_disconnectivity(healthy, {cfg.remove_edges, {}});
      if (disconnector_oracle(healthy, removed_only).size() != cfg.remove_edges.size()) continue;
    }
    if (!disconnector_oracle(healthy, plant_disconnectivity(healthy, cfg)).empty()) {
      return cfg;
    }
  }
  throw NumericalError("no planted removal split a module after " +
                       std::to_string(max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Gaussian models

/// Symmetric matrix with unit diagonal; off-diagonal (i,j) is a partial
/// correlation, inside [-band, band] exactly when (i,j) is not an edge.
struct PartialCorrMatrix {
  Matrix values;
};

/// Edge entries are uniform on [-1, 1] minus [-1e-4, 1e-4]; non-edge
/// entries uniform on [-1e-4, 1e-4]. Each pair consumes the same draws
/// whether or not it is an edge, so two graphs sampled with one seed share
/// their values on common edges.
inline PartialCorrMatrix random_partial_corr(const LabeledGraph& g, std::uint64_t seed) {
  const std::size_t p = g.id_space();
  Matrix r = Matrix::Identity(p, p);
  Rng rng(seed);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const double u_mag = rng.uniform();
      const double u_sign = rng.uniform();
      const double u_zero = rng.uniform();
      double value;
      if (g.has_edge(i, j)) {
        // (band, 1]
        const double mag = kNearZeroBand + (1.0 - kNearZeroBand) * (1.0 - u_mag);
        value = u_sign < 0.5 ? -mag : mag;
      } else {
        value = -kNearZeroBand + 2.0 * kNearZeroBand * u_zero;
      }
      r(i, j) = r(j, i) = value;
    }
  }
  return {std::move(r)};
}

struct CovModel {
  Matrix precision;
  Matrix covariance;
  Vector mean;
  /// Common factor applied to the off-diagonal of the precision matrix.
  double scale = 1.0;
};

/// Largest scale in (0, 1] for which I - scale * offdiag(r) has smallest
/// eigenvalue >= kMinPrecisionEigenvalue. The smallest eigenvalue is
/// 1 - scale * lambda_max(offdiag(r)), so the bound is closed form.
inline double spd_scale(const PartialCorrMatrix& r,
                        double min_eigenvalue = kMinPrecisionEigenvalue) {
  Matrix off = r.values;
  off.diagonal().setZero();
  if (off.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(off, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  const double limit = 1.0 - min_eigenvalue;
  if (top <= limit) return 1.0;
  return limit / top;
}

/// Precision with unit diagonal and off-diagonal -scale * r_ij, so its
/// partial correlations are scale * r_ij. scale = min(max_scale, spd_scale).
inline CovModel pcorr_to_cov_model(const PartialCorrMatrix& r, double max_scale = 1.0) {
  const std::size_t p = static_cast<std::size_t>(r.values.rows());
  const double scale = std::min(max_scale, spd_scale(r));
  CovModel m;
  m.scale = scale;
  m.precision = -scale * r.values;
  m.precision.diagonal().setOnes();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const bool edge = std::abs(r.values(i, j)) > kNearZeroBand;
      if (edge && std::abs(m.precision(i, j)) <= kNearZeroBand) {
        throw NumericalError("SPD repair pushed an edge into the near-zero band");
      }
    }
  }
  Eigen::LLT<Matrix> llt(m.precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("precision matrix is not positive definite after repair");
  }
  m.covariance = llt.solve(Matrix::Identity(p, p));
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  m.mean = Vector::Zero(p);
  const double err = (m.covariance * m.precision - Matrix::Identity(p, p)).cwiseAbs().maxCoeff();
  if (err >= 1e-8) {
    throw NumericalError("covariance inversion residual " + std::to_string(err));
  }
  return m;
}

/// Models for a healthy/patient pair. Both draw partial correlations from
/// the same seed, so shared edges carry identical values, and both use the
/// smaller of the two SPD scales so the groups differ only where the graphs
/// differ.
inline std::pair<CovModel, CovModel> group_models(const LabeledGraph& healthy,
                                                  const LabeledGraph& patient,
                                                  std::uint64_t seed,
                                                  double min_eigenvalue = kMinPrecisionEigenvalue) {
  const auto rh = random_partial_corr(healthy, seed);
  const auto rp = random_partial_corr(patient, seed);
  const double scale = std::min(spd_scale(rh, min_eigenvalue), spd_scale(rp, min_eigenvalue));
  return {pcorr_to_cov_model(rh, scale), pcorr_to_cov_model(rp, scale)};
}

// ---------------------------------------------------------------------------
// Sampling and noise

struct SampleSet {
  /// Rows are subjects, columns are nodes.
  Matrix data;
  std::string group;
  std::uint64_t seed = 0;
  /// +inf for noise-free data.
  double snr_db = std::numeric_limits<double>::infinity();
  /// Per-node signal variance (the model's diagonal when known).
  Vector signal_variance;
  std::vector<std::string> modalities;
};

/// n draws from N(0, covariance) as L z with L the Cholesky factor.
inline SampleSet sample_gaussian(const CovModel& model, std::size_t n, std::uint64_t seed,
                                 std::string group = {}) {
  if (n < 1) throw InputError("sample count must be at least 1");
  Eigen::LLT<Matrix> llt(model.covariance);
  if (llt.info() != Eigen::Success) {
    throw InputError("covariance matrix is not positive definite");
  }
  const Matrix lower = llt.matrixL();
  const auto p = model.covariance.rows();
  Rng rng(seed);
  Matrix z(p, static_cast<Eigen::Index>(n));
  for (Eigen::Index s = 0; s < z.cols(); ++s) {
    for (Eigen::Index j = 0; j < p; ++j) z(j, s) = rng.normal();
  }
  SampleSet out;
  out.data = (lower * z).transpose();
  if (model.mean.size() == p) out.data.rowwise() += model.mean.transpose();
  out.group = std::move(group);
  out.seed = seed;
  out.signal_variance = model.covariance.diagonal();
  return out;
}

/// Noise variance per node: signal variance / 10^(snr_db / 10).
inline Vector noise_variance_for_snr(const Vector& signal_variance, double snr_db) {
  return signal_variance / std::pow(10.0, snr_db / 10.0);
}

/// Adds white Gaussian noise at the requested per-node SNR. Signal variance
/// comes from the model that generated the samples or, when unknown, from
/// the empirical column variance. snr_db = +inf returns the input.
inline SampleSet add_noise_for_snr(const SampleSet& s, double snr_db, std::uint64_t seed) {
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw InputError("SNR must be finite or +inf");
  }
  if (std::isinf(snr_db)) return s;
  Vector signal = s.signal_variance;
  if (signal.size() != s.data.cols()) {
    const auto n = static_cast<double>(s.data.rows());
    const Vector mean = s.data.colwise().mean();
    signal = (s.data.rowwise() - mean.transpose()).colwise().squaredNorm() / std::max(1.0, n - 1);
  }
  const Vector sd = noise_variance_for_snr(signal, snr_db).cwiseSqrt();
  SampleSet out = s;
  Rng rng(seed);
  for (Eigen::Index r = 0; r < out.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.data.cols(); ++c) out.data(r, c) += sd(c) * rng.normal();
  }
  out.snr_db = snr_db;
  out.seed = seed;
  return out;
}

}  // namespace mmflow
