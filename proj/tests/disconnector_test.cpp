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

#include "mmflow/disconnector.hpp"
#include "support.hpp"

using namespace mmflow;
using namespace mmflow::testing;

TEST(DetectSplits, ThreeModule) {
  const auto splits = detect_splits(connected_components(three_module_healthy()),
                                    connected_components(three_module_patient()));
  ASSERT_EQ(splits.size(), 1u);
  EXPECT_EQ(splits[0].healthy_module, 0u);
  EXPECT_EQ(splits[0].patient_modules, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(FindDisconnectors, ThreeModuleGolden) {
  const auto r = find_disconnectors(three_module_healthy(), three_module_patient());
  EXPECT_EQ(r.direct_edges(), edges1({{4, 5}, {2, 6}}));
  EXPECT_EQ(r.indirect(), (std::set<ModulePair>{{1, 2}}));
  EXPECT_TRUE(r.rejected_edges().count(e1(2, 5)));
  const auto direct = r.direct();
  EXPECT_EQ(direct.at({0, 1}), edges1({{4, 5}}));
  EXPECT_EQ(direct.at({0, 2}), edges1({{2, 6}}));
}

TEST(FindDisconnectors, FourModuleGolden) {
  const auto r = find_disconnectors(four_module_healthy(), four_module_patient());
  ASSERT_EQ(r.splits.size(), 1u);
  const auto& modules = r.patient_modules.modules;
  EXPECT_EQ(modules, (std::vector<std::vector<NodeId>>{{0, 1, 2, 5}, {3, 4, 7, 8}, {6, 9}, {10}}));
  const auto direct = r.direct();
  EXPECT_EQ(direct.at({0, 1}), edges1({{2, 5}}));
  EXPECT_EQ(direct.at({0, 2}), edges1({{6, 7}}));
  EXPECT_EQ(direct.at({2, 3}), edges1({{10, 11}}));
  EXPECT_EQ(r.indirect(), (std::set<ModulePair>{{0, 3}, {1, 2}, {1, 3}}));
  EXPECT_EQ(r.splits[0].direct_union(), edges1({{2, 5}, {6, 7}, {10, 11}}));
}

TEST(FindDisconnectors, AddedEdgeNeverReported) {
  const auto r = find_disconnectors(four_module_healthy(), four_module_patient());
  EXPECT_FALSE(r.direct_edges().count(e1(8, 9)));
  EXPECT_FALSE(r.rejected_edges().count(e1(8, 9)));
}

TEST(FindDisconnectors, IdenticalGraphsGiveEmptyReport) {
  const auto g = four_module_healthy();
  const auto r = find_disconnectors(g, g);
  EXPECT_TRUE(r.empty());
  EXPECT_TRUE(r.direct_edges().empty());
}

TEST(FindDisconnectors, NodeSpaceMismatchIsInputError) {
  EXPECT_THROW(find_disconnectors(three_module_healthy(), four_module_patient()), InputError);
  const LabeledGraph relabeled(labels({{"A", 8}}), three_module_patient().edges());
  EXPECT_THROW(find_disconnectors(three_module_healthy(), relabeled), InputError);
}

TEST(FindDisconnectors, MatchesOracleOnRandomPairs) {
  Rng rng(2024);
  int with_truth = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = 2 + rng.below(14);
    const auto h = random_graph(p, rng.uniform(0.1, 0.6), rng);
    const auto pt = perturb(h, rng.uniform(0.05, 0.5), rng.below(3), rng);
    const auto r = find_disconnectors(h, pt);
    const auto truth = disconnector_oracle(h, pt);
    with_truth += !truth.empty();
    ASSERT_EQ(r.direct_edges(), truth) << "trial " << trial;
    for (const auto& split : r.splits) {
      for (const auto& pa : split.pairs) {
        for (const auto& e : pa.direct) {
          // Soundness: missing in the patient graph, present in the healthy.
          EXPECT_TRUE(h.edges().count(e));
          EXPECT_FALSE(pt.edges().count(e));
          // Endpoint rule: same healthy module, the two patient modules.
          EXPECT_EQ(r.healthy_modules.module_of(e.u), split.healthy_module);
          EXPECT_EQ(r.healthy_modules.module_of(e.v), split.healthy_module);
          const auto mu = r.patient_modules.module_of(e.u);
          const auto mv = r.patient_modules.module_of(e.v);
          EXPECT_NE(mu, mv);
          EXPECT_TRUE((mu == pa.pair.first && mv == pa.pair.second) ||
                      (mv == pa.pair.first && mu == pa.pair.second));
        }
        EXPECT_EQ(pa.indirect(), pa.direct.empty());
      }
    }
  }
  EXPECT_GT(with_truth, 50);
}

TEST(Report, JsonAndTextRendering) {
  const auto r = find_disconnectors(three_module_healthy(), three_module_patient());
  const auto j = report_to_json(r);
  EXPECT_EQ(j["disconnectors"].dump(), "[[2,6],[4,5]]");
  EXPECT_EQ(j["splits"].size(), 1u);
  const auto text = report_to_text(r);
  EXPECT_NE(text.find("missing (4,5)"), std::string::npos);
  EXPECT_NE(text.find("indirect"), std::string::npos);
}
