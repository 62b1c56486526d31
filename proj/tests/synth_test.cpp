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

#include <gtest/gtest.h>

#include <cmath>

#include "mmflow/estimator.hpp"
#include "mmflow/synth.hpp"
#include "support.hpp"

using namespace mmflow;
using namespace mmflow::testing;

TEST(Rng, SubstreamsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "noise", {2, 3}), derive_seed(1, "noise", {2, 3}));
  EXPECT_NE(derive_seed(1, "noise", {2, 3}), derive_seed(1, "noise", {3, 2}));
  EXPECT_NE(derive_seed(1, "noise"), derive_seed(1, "graph"));
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(9);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

TEST(Sbm, DefaultWithinProbability) {
  EXPECT_NEAR(default_within_probability(11), std::log(11.0) / 11.0, 1e-15);
  EXPECT_EQ(block_label(0), "A");
  EXPECT_EQ(block_label(2), "C");
}

TEST(Sbm, EdgeRateMatchesWithinProbability) {
  SbmConfig cfg;
  cfg.block_sizes = {11};
  std::size_t edges = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    cfg.seed = derive_seed(3, "sbm", {static_cast<std::uint64_t>(k)});
    edges += generate_sbm(cfg).edge_count();
  }
  EXPECT_NEAR(double(edges) / (draws * 55.0), std::log(11.0) / 11.0, 0.01);
}

TEST(Sbm, LabelsAndValidation) {
  SbmConfig cfg;
  cfg.seed = 4;
  const auto g = generate_sbm(cfg);
  EXPECT_EQ(g.id_space(), 17u);
  EXPECT_EQ(g.modality(0), "A");
  EXPECT_EQ(g.modality(3), "B");
  EXPECT_EQ(g.modality(16), "C");
  cfg.p_between = 1.5;
  EXPECT_THROW(generate_sbm(cfg), InputError);
  cfg.p_between = 0.01;
  cfg.block_sizes = {};
  EXPECT_THROW(generate_sbm(cfg), InputError);
}

TEST(Plant, ExplicitEditsAndErrors) {
  const auto h = four_module_healthy();
  const auto p = plant_disconnectivity(h, {{e1(2, 5), e1(6, 7), e1(10, 11)}, {e1(8, 9)}});
  EXPECT_EQ(p, four_module_patient());
  EXPECT_THROW(plant_disconnectivity(h, {{e1(1, 4)}, {}}), InputError);
  EXPECT_THROW(plant_disconnectivity(h, {{}, {e1(1, 2)}}), InputError);
}

TEST(Plant, RandomPlantEachRemovalSplits) {
  for (std::uint64_t k = 0; k < 30; ++k) {
    SbmConfig cfg;
    cfg.seed = derive_seed(8, "g", {k});
    const auto h = generate_sbm(cfg);
    PlantConfig plant;
    try {
      plant = random_plant(h, 3, 1, derive_seed(8, "plant", {k}));
    } catch (const NumericalError&) {
      continue;  // graph too sparse for three splitting removals
    }
    const auto p = plant_disconnectivity(h, plant);
    const auto truth = disconnector_oracle(h, p);
    EXPECT_FALSE(truth.empty());
    const auto removed_only = plant_disconnectivity(h, {plant.remove_edges, {}});
    EXPECT_EQ(disconnector_oracle(h, removed_only).size(), 3u);
  }
}

TEST(PartialCorr, PatternFidelity) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(12, 0.3, rng);
    const auto r = random_partial_corr(g, 100 + trial);
    for (NodeId i = 0; i < 12; ++i) {
      EXPECT_EQ(r.values(i, i), 1.0);
      for (NodeId j = i + 1; j < 12; ++j) {
        EXPECT_EQ(r.values(i, j), r.values(j, i));
        if (g.has_edge(i, j)) {
          EXPECT_GT(std::abs(r.values(i, j)), kNearZeroBand);
          EXPECT_LE(std::abs(r.values(i, j)), 1.0);
        } else {
          EXPECT_LE(std::abs(r.values(i, j)), kNearZeroBand);
        }
      }
    }
  }
}

TEST(PartialCorr, SharedEdgesShareValues) {
  const auto rh = random_partial_corr(four_module_healthy(), 77);
  const auto rp = random_partial_corr(four_module_patient(), 77);
  EXPECT_EQ(rh.values(0, 1), rp.values(0, 1));  // (1,2) in both
  EXPECT_EQ(rh.values(8, 4), rp.values(8, 4));  // (5,9) in both
}

TEST(CovModel, TwoByTwoClosedForm) {
  PartialCorrMatrix r{Matrix::Identity(2, 2)};
  r.values(0, 1) = r.values(1, 0) = 0.5;
  const auto m = pcorr_to_cov_model(r);
  EXPECT_DOUBLE_EQ(m.scale, 1.0);
  EXPECT_DOUBLE_EQ(m.precision(0, 1), -0.5);
  EXPECT_NEAR(m.covariance(0, 0), 1.0 / 0.75, 1e-12);
  EXPECT_NEAR(m.covariance(0, 1), 0.5 / 0.75, 1e-12);
  // Partial correlation recovers the input.
  EXPECT_NEAR(precision_to_pcorr(m.precision).values(0, 1), 0.5, 1e-12);
}

TEST(CovModel, RepairKeepsEigenvalueFloor) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    SbmConfig cfg;
    cfg.seed = derive_seed(21, "g", {k});
    const auto g = generate_sbm(cfg);
    const auto [h, p] = group_models(g, g, derive_seed(21, "r", {k}));
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.precision);
    EXPECT_GE(es.eigenvalues().minCoeff(), kMinPrecisionEigenvalue - 1e-9);
    EXPECT_LE(h.scale, 1.0);
    const auto pc = precision_to_pcorr(h.precision);
    for (const auto& e : g.edges()) {
      EXPECT_GT(std::abs(pc.values(e.u, e.v)), kNearZeroBand);
    }
    EXPECT_LT((h.covariance * h.precision - Matrix::Identity(17, 17)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(CovModel, GroupsShareScale) {
  const auto [h, p] = group_models(four_module_healthy(), four_module_patient(), 5);
  EXPECT_EQ(h.scale, p.scale);
  EXPECT_EQ(h.precision(0, 1), p.precision(0, 1));
}

TEST(Sampling, EmpiricalCorrelationConverges) {
  const auto m = group_models(four_module_healthy(), four_module_patient(), 31).first;
  const auto s = sample_gaussian(m, 100000, 32);
  const Matrix cov = empirical_covariance(s.data);
  const Vector sd_e = cov.diagonal().cwiseSqrt();
  const Vector sd_m = m.covariance.diagonal().cwiseSqrt();
  const Matrix ce = sd_e.cwiseInverse().asDiagonal() * cov * sd_e.cwiseInverse().asDiagonal();
  const Matrix cm = sd_m.cwiseInverse().asDiagonal() * m.covariance * sd_m.cwiseInverse().asDiagonal();
  EXPECT_LT((ce - cm).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT(((cov.diagonal() - m.covariance.diagonal()).array() / m.covariance.diagonal().array())
                .abs()
                .maxCoeff(),
            0.03);
}

TEST(Noise, TwentyDbGivesOnePercentVariance) {
  CovModel m;
  m.covariance = Matrix::Identity(3, 3) * 4.0;
  m.precision = Matrix::Identity(3, 3) * 0.25;
  m.mean = Vector::Zero(3);
  const auto s = sample_gaussian(m, 100000, 1);
  const auto noisy = add_noise_for_snr(s, 20.0, 2);
  const Matrix noise = noisy.data - s.data;
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double var = noise.col(c).squaredNorm() / noise.rows();
    EXPECT_NEAR(var / 4.0, 0.01, 0.01 * 0.05);
  }
  EXPECT_NEAR(noise_variance_for_snr(Vector::Ones(1), 10.0)(0), 0.1, 1e-15);
}

TEST(Noise, CleanAndInvalidSnr) {
  const auto m = group_models(three_module_healthy(), three_module_patient(), 3).first;
  const auto s = sample_gaussian(m, 50, 4);
  EXPECT_EQ(add_noise_for_snr(s, std::numeric_limits<double>::infinity(), 5).data, s.data);
  EXPECT_THROW(add_noise_for_snr(s, std::nan(""), 5), InputError);
  EXPECT_THROW(add_noise_for_snr(s, -std::numeric_limits<double>::infinity(), 5), InputError);
}
