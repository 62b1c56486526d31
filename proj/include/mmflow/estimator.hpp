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

// Joint sparse precision estimation across groups (joint graphical lasso
// with a group penalty), partial correlations, and significance-tested
// adjacency extraction.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmflow/errors.hpp"
#include "mmflow/graph.hpp"
#include "mmflow/synth.hpp"

namespace mmflow {

struct JointOptions {
  double lambda_sparse = 0.0;
  double lambda_joint = 0.0;
  double rho = 1.0;
  double tolerance = 1e-5;
  int max_iterations = 5000;
};

struct PrecisionSet {
  std::vector<Matrix> precision;
  std::vector<std::size_t> sample_counts;
  double lambda_sparse = 0.0;
  double lambda_joint = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// Non-convergence, carrying the final residuals.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double primal, double dual)
      : NumericalError(what), primal_residual(primal), dual_residual(dual) {}
  double primal_residual;
  double dual_residual;
};

/// Maximum-likelihood covariance (divides by n) of mean-centred rows.
inline Matrix empirical_covariance(const Matrix& data) {
  const Matrix centred = data.rowwise() - data.colwise().mean();
  return (centred.transpose() * centred) / static_cast<double>(data.rows());
}

namespace detail {

/// ADMM state carried between fits along a regularization path.
struct AdmmState {
  std::vector<Matrix> z;
  std::vector<Matrix> u;
  double rho = 1.0;
};

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace detail

/// Minimizes
///
///   sum_k w_k (tr(S_k Theta_k) - log det Theta_k)
///     + lambda_sparse * sum_k sum_{i != j} |Theta_k,ij|
///     + lambda_joint  * sum_{i != j} sqrt(sum_k Theta_k,ij^2)
///
/// with w_k = n_k / mean(n), by ADMM on the split Theta = Z. Returns the
/// sparse iterate Z. Convergence requires both the primal residual
/// |Theta - Z| and the dual residual rho |Z - Z_prev|, each relative to the
/// iterate norm floored at 1, to fall below the tolerance. Residual-balancing adjusts rho during the first half of
/// the iteration budget.
inline PrecisionSet joint_estimate(const std::vector<Matrix>& covariances,
                                   const std::vector<std::size_t>& sample_counts,
                                   const JointOptions& opt,
                                   detail::AdmmState* warm = nullptr) {
  const std::size_t groups = covariances.size();
  if (groups < 2) throw InputError("joint estimation needs at least two groups");
  if (sample_counts.size() != groups) throw InputError("one sample count per group required");
  const auto p = covariances.front().rows();
  if (p < 2) throw InputError("at least two variables (columns) are required");
  for (std::size_t k = 0; k < groups; ++k) {
    if (covariances[k].rows() != p || covariances[k].cols() != p) {
      throw InputError("groups have different numbers of variables");
    }
    if (sample_counts[k] <= 3) throw InputError("each group needs more than 3 samples");
  }
  if (opt.lambda_sparse < 0 || opt.lambda_joint < 0) {
    throw InputError("regularization parameters must be non-negative");
  }
  if (opt.lambda_sparse == 0.0 && opt.lambda_joint == 0.0) {
    for (const auto& s : covariances) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(1.0, s.trace())) {
        throw NumericalError(
            "empirical covariance is rank deficient; use a larger lambda_sparse");
      }
    }
  }

  const double mean_n =
      std::accumulate(sample_counts.begin(), sample_counts.end(), 0.0) / groups;
  std::vector<double> weight(groups);
  for (std::size_t k = 0; k < groups; ++k) weight[k] = sample_counts[k] / mean_n;

  detail::AdmmState local;
  detail::AdmmState& st = warm ? *warm : local;
  if (st.z.size() != groups || st.z.front().rows() != p) {
    st.z.assign(groups, Matrix::Identity(p, p));
    st.u.assign(groups, Matrix::Zero(p, p));
    st.rho = opt.rho;
  }

  std::vector<Matrix> theta(groups, Matrix::Identity(p, p));
  std::vector<Matrix> z_old(groups);
  Eigen::SelfAdjointEigenSolver<Matrix> es(p);
  double primal = 0.0, dual = 0.0;
  int iter = 0;
  for (iter = 1; iter <= opt.max_iterations; ++iter) {
    const double rho = st.rho;
    for (std::size_t k = 0; k < groups; ++k) {
      const Matrix m = rho * (st.z[k] - st.u[k]) - weight[k] * covariances[k];
      es.compute(m);
      const Vector d = es.eigenvalues();
      Vector t(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        t(j) = (d(j) + std::sqrt(d(j) * d(j) + 4.0 * rho * weight[k])) / (2.0 * rho);
      }
      theta[k].noalias() = es.eigenvectors() * t.asDiagonal() * es.eigenvectors().transpose();
      theta[k] = 0.5 * (theta[k] + theta[k].transpose()).eval();
      z_old[k] = st.z[k];
    }

    const double t1 = opt.lambda_sparse / rho;
    const double t2 = opt.lambda_joint / rho;
    std::vector<double> shrunk(groups);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (std::size_t k = 0; k < groups; ++k) st.z[k](i, i) = theta[k](i, i) + st.u[k](i, i);
      for (Eigen::Index j = i + 1; j < p; ++j) {
        double norm2 = 0.0;
        for (std::size_t k = 0; k < groups; ++k) {
          const double a = theta[k](i, j) + st.u[k](i, j);
          shrunk[k] = detail::soft_threshold(a, t1);
          norm2 += shrunk[k] * shrunk[k];
        }
        const double norm = std::sqrt(norm2);
        const double factor = norm > t2 ? 1.0 - t2 / norm : 0.0;
        for (std::size_t k = 0; k < groups; ++k) {
          st.z[k](i, j) = st.z[k](j, i) = shrunk[k] * factor;
        }
      }
    }

    double r2 = 0.0, s2 = 0.0, theta2 = 0.0, z2 = 0.0, u2 = 0.0;
    for (std::size_t k = 0; k < groups; ++k) {
      const Matrix diff = theta[k] - st.z[k];
      st.u[k] += diff;
      r2 += diff.squaredNorm();
      s2 += (st.z[k] - z_old[k]).squaredNorm();
      theta2 += theta[k].squaredNorm();
      z2 += st.z[k].squaredNorm();
      u2 += st.u[k].squaredNorm();
    }
    // Residuals relative to the iterate scale (at least 1).
    primal = std::sqrt(r2) / std::max({1.0, std::sqrt(theta2), std::sqrt(z2)});
    dual = rho * std::sqrt(s2) / std::max(1.0, rho * std::sqrt(u2));
    if (primal < opt.tolerance && dual < opt.tolerance) break;

    if (iter < opt.max_iterations / 2) {
      if (primal > 10.0 * dual) {
        st.rho *= 2.0;
        for (auto& u : st.u) u /= 2.0;
      } else if (dual > 10.0 * primal) {
        st.rho /= 2.0;
        for (auto& u : st.u) u *= 2.0;
      }
    }
  }
  if (iter > opt.max_iterations) {
    std::ostringstream msg;
    msg << "joint estimation did not converge in " << opt.max_iterations
        << " iterations (primal residual " << primal << ", dual residual " << dual << ")";
    throw SolverError(msg.str(), primal, dual);
  }

  PrecisionSet out;
  out.precision = st.z;
  out.sample_counts = sample_counts;
  out.lambda_sparse = opt.lambda_sparse;
  out.lambda_joint = opt.lambda_joint;
  out.iterations = iter;
  out.primal_residual = primal;
  out.dual_residual = dual;
  for (const auto& prec : out.precision) {
    Eigen::LLT<Matrix> llt(prec);
    if (llt.info() != Eigen::Success) {
      throw SolverError("estimated precision is not positive definite", primal, dual);
    }
  }
  return out;
}

inline PrecisionSet joint_estimate(const std::vector<SampleSet>& groups, double lambda_sparse,
                                   double lambda_joint, JointOptions opt = {}) {
  std::vector<Matrix> cov;
  std::vector<std::size_t> n;
  for (const auto& g : groups) {
    if (g.data.rows() <= 3) throw InputError("each group needs more than 3 samples");
    cov.push_back(empirical_covariance(g.data));
    n.push_back(static_cast<std::size_t>(g.data.rows()));
  }
  opt.lambda_sparse = lambda_sparse;
  opt.lambda_joint = lambda_joint;
  return joint_estimate(cov, n, opt);
}

// ---------------------------------------------------------------------------
// Regularization selection

/// Number of non-zero upper-triangular entries.
inline std::size_t offdiag_support(const Matrix& m) {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) count += m(i, j) != 0.0;
  }
  return count;
}

/// Extended BIC summed over groups:
///   n (tr(S Theta) - log det Theta) + |E| log n + 4 gamma |E| log p.
inline double extended_bic(const std::vector<Matrix>& covariances, const PrecisionSet& fit,
                           double gamma = 0.5) {
  double total = 0.0;
  for (std::size_t k = 0; k < covariances.size(); ++k) {
    const Matrix& theta = fit.precision[k];
    const double n = static_cast<double>(fit.sample_counts[k]);
    const double p = static_cast<double>(theta.rows());
    Eigen::LLT<Matrix> llt(theta);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double edges = static_cast<double>(offdiag_support(theta));
    total += n * ((covariances[k] * theta).trace() - logdet) + edges * std::log(n) +
             4.0 * gamma * edges * std::log(p);
  }
  return total;
}

struct LambdaGrid {
  /// Number of log-spaced lambda_sparse values from lambda_max down.
  int sparse_points = 16;
  /// Smallest lambda_sparse as a fraction of lambda_max.
  double min_ratio = 1e-4;
  /// lambda_joint = ratio * lambda_sparse for each ratio.
  std::vector<double> joint_ratios = {0.0, 0.5};
  double ebic_gamma = 0.5;
};

struct LambdaSelection {
  PrecisionSet fit;
  double ebic = 0.0;
  /// (lambda_sparse, lambda_joint, ebic) for every grid point evaluated.
  std::vector<std::array<double, 3>> path;
};

/// Largest off-diagonal magnitude of the weighted covariances; at or above
/// it every off-diagonal estimate is zero when lambda_joint = 0.
inline double lambda_max(const std::vector<Matrix>& covariances,
                         const std::vector<std::size_t>& sample_counts) {
  const double mean_n =
      std::accumulate(sample_counts.begin(), sample_counts.end(), 0.0) / sample_counts.size();
  double top = 0.0;
  for (std::size_t k = 0; k < covariances.size(); ++k) {
    Matrix off = covariances[k];
    off.diagonal().setZero();
    top = std::max(top, off.cwiseAbs().maxCoeff() * sample_counts[k] / mean_n);
  }
  return top;
}

/// Grid search minimizing the joint extended BIC. Fits run from the largest
/// lambda down, warm-started. Grid points whose solver fails are skipped.
inline LambdaSelection select_lambda(const std::vector<Matrix>& covariances,
                                     const std::vector<std::size_t>& sample_counts,
                                     const LambdaGrid& grid = {}, JointOptions base = {}) {
  const double top = std::max(lambda_max(covariances, sample_counts), 1e-8);
  std::optional<LambdaSelection> best;
  std::vector<std::array<double, 3>> path;
  std::string last_error;
  for (double ratio : grid.joint_ratios) {
    detail::AdmmState warm;
    for (int i = 0; i < grid.sparse_points; ++i) {
      const double frac =
          grid.sparse_points == 1
              ? 1.0
              : std::pow(grid.min_ratio, static_cast<double>(i) / (grid.sparse_points - 1));
      JointOptions opt = base;
      opt.lambda_sparse = top * frac;
      opt.lambda_joint = ratio * opt.lambda_sparse;
      try {
        auto fit = joint_estimate(covariances, sample_counts, opt, &warm);
        const double score = extended_bic(covariances, fit, grid.ebic_gamma);
        path.push_back({opt.lambda_sparse, opt.lambda_joint, score});
        if (!best || score < best->ebic) best = LambdaSelection{std::move(fit), score, {}};
      } catch (const NumericalError& e) {
        last_error = e.what();
        warm = {};
      }
    }
  }
  if (!best) throw NumericalError("no grid point converged: " + last_error);
  best->path = std::move(path);
  return *std::move(best);
}

// ---------------------------------------------------------------------------
// Partial correlations and significance

/// rho_ij = -Omega_ij / sqrt(Omega_ii Omega_jj), unit diagonal.
inline PartialCorrMatrix precision_to_pcorr(const Matrix& precision) {
  const auto p = precision.rows();
  if (precision.cols() != p) throw InputError("precision matrix must be square");
  const Vector d = precision.diagonal();
  if ((d.array() <= 0.0).any()) throw InputError("precision matrix has a non-positive diagonal");
  const Vector inv_sqrt = d.cwiseSqrt().cwiseInverse();
  Matrix r = -(inv_sqrt.asDiagonal() * precision * inv_sqrt.asDiagonal());
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  return {std::move(r)};
}

enum class Correction { None, Bonferroni, BenjaminiHochberg };

inline std::string correction_name(Correction c) {
  switch (c) {
    case Correction::None: return "none";
    case Correction::Bonferroni: return "bonferroni";
    case Correction::BenjaminiHochberg: return "bh";
  }
  return "?";
}

inline Correction parse_correction(const std::string& name) {
  if (name == "none") return Correction::None;
  if (name == "bonferroni") return Correction::Bonferroni;
  if (name == "bh" || name == "fdr_bh" || name == "benjamini-hochberg") {
    return Correction::BenjaminiHochberg;
  }
  throw InputError("unknown correction '" + name + "' (expected none, bonferroni or bh)");
}

/// Corrected p-values in the input order.
inline std::vector<double> adjust_p_values(const std::vector<double>& p, Correction c) {
  const std::size_t m = p.size();
  std::vector<double> out(p);
  if (m == 0 || c == Correction::None) return out;
  if (c == Correction::Bonferroni) {
    for (auto& v : out) v = std::min(1.0, v * static_cast<double>(m));
    return out;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  double running = 1.0;
  for (std::size_t rank = m; rank-- > 0;) {
    const auto idx = order[rank];
    running = std::min(running, p[idx] * static_cast<double>(m) / static_cast<double>(rank + 1));
    out[idx] = std::min(1.0, running);
  }
  return out;
}

struct Adjacency {
  Eigen::MatrixXi edges;
  /// Corrected two-sided p-values (diagonal unused, set to 1).
  Matrix p_values;
  double alpha = 0.05;
  Correction correction = Correction::BenjaminiHochberg;
};

/// Fisher z-test per off-diagonal partial correlation:
///   z = atanh(rho) * sqrt(n - (p - 2) - 3),
/// two-sided normal p-value, multiple-comparison correction over the
/// p(p-1)/2 tests, and an edge wherever the corrected p-value is below alpha.
inline Adjacency significance_adjacency(const PartialCorrMatrix& pc, std::size_t n, double alpha,
                                        Correction correction) {
  const auto p = pc.values.rows();
  if (static_cast<double>(n) <= static_cast<double>(p) + 3.0) {
    throw InputError("significance test needs n > p + 3 (n = " + std::to_string(n) +
                     ", p = " + std::to_string(p) + ")");
  }
  const double scale = std::sqrt(static_cast<double>(n) - static_cast<double>(p - 2) - 3.0);
  std::vector<double> raw;
  bool saturated = false;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      const double rho = pc.values(i, j);
      if (std::abs(rho) >= 1.0) {
        saturated = true;
        raw.push_back(0.0);
        continue;
      }
      const double z = std::atanh(rho) * scale;
      raw.push_back(std::erfc(std::abs(z) / std::sqrt(2.0)));
    }
  }
  if (saturated) warn("partial correlation of magnitude 1 treated as p-value 0");
  const auto adjusted = adjust_p_values(raw, correction);
  Adjacency adj;
  adj.alpha = alpha;
  adj.correction = correction;
  adj.edges = Eigen::MatrixXi::Zero(p, p);
  adj.p_values = Matrix::Ones(p, p);
  std::size_t t = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j, ++t) {
      adj.p_values(i, j) = adj.p_values(j, i) = adjusted[t];
      const int on = adjusted[t] < alpha ? 1 : 0;
      adj.edges(i, j) = adj.edges(j, i) = on;
    }
  }
  return adj;
}

inline LabeledGraph adjacency_to_graph(const Adjacency& adj, std::vector<std::string> modalities) {
  const auto p = adj.edges.rows();
  if (modalities.empty()) modalities.assign(static_cast<std::size_t>(p), "X");
  if (static_cast<Eigen::Index>(modalities.size()) != p) {
    throw InputError("modality list does not match the adjacency size");
  }
  EdgeSet edges;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      if (adj.edges(i, j)) edges.insert(Edge(static_cast<NodeId>(i), static_cast<NodeId>(j)));
    }
  }
  return LabeledGraph(std::move(modalities), std::move(edges));
}

// ---------------------------------------------------------------------------
// End-to-end group graph estimation

struct EstimateOptions {
  /// Unset means grid search by extended BIC.
  std::optional<double> lambda_sparse;
  double lambda_joint = 0.0;
  /// Fit on correlation matrices and rescale the precisions back, so the
  /// penalty treats every node alike regardless of its variance.
  bool standardize = true;
  double alpha = 0.05;
  Correction correction = Correction::BenjaminiHochberg;
  LambdaGrid grid;
  JointOptions solver;
};

struct GroupGraphs {
  PrecisionSet precisions;
  std::vector<PartialCorrMatrix> partial_correlations;
  std::vector<Adjacency> adjacencies;
  std::vector<LabeledGraph> graphs;
};

inline GroupGraphs estimate_group_graphs(const std::vector<SampleSet>& groups,
                                         const EstimateOptions& opt) {
  if (groups.size() < 2) throw InputError("at least two groups are required");
  std::vector<Matrix> cov;
  std::vector<std::size_t> n;
  for (const auto& g : groups) {
    if (g.data.cols() < 2) throw InputError("at least two variables (columns) are required");
    if (g.data.rows() <= 3) throw InputError("each group needs more than 3 samples");
    cov.push_back(empirical_covariance(g.data));
    n.push_back(static_cast<std::size_t>(g.data.rows()));
  }
  std::vector<Vector> inv_sd;
  if (opt.standardize) {
    for (auto& s : cov) {
      if ((s.diagonal().array() <= 0.0).any()) throw InputError("a variable has zero variance");
      inv_sd.push_back(s.diagonal().cwiseSqrt().cwiseInverse());
      s = inv_sd.back().asDiagonal() * s * inv_sd.back().asDiagonal();
    }
  }
  GroupGraphs out;
  if (opt.lambda_sparse) {
    JointOptions solver = opt.solver;
    solver.lambda_sparse = *opt.lambda_sparse;
    solver.lambda_joint = opt.lambda_joint;
    out.precisions = joint_estimate(cov, n, solver);
  } else {
    out.precisions = select_lambda(cov, n, opt.grid, opt.solver).fit;
  }
  for (std::size_t k = 0; k < inv_sd.size(); ++k) {
    auto& prec = out.precisions.precision[k];
    prec = inv_sd[k].asDiagonal() * prec * inv_sd[k].asDiagonal();
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    out.partial_correlations.push_back(precision_to_pcorr(out.precisions.precision[k]));
    out.adjacencies.push_back(
        significance_adjacency(out.partial_correlations.back(), n[k], opt.alpha, opt.correction));
    out.graphs.push_back(adjacency_to_graph(out.adjacencies.back(), groups[k].modalities));
  }
  return out;
}

}  // namespace mmflow
