/*
 * Copyright 2026 The spinrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinrec/attribution.hpp"
#include "spinrec/fidelity.hpp"
#include "spinrec/random.hpp"
#include "test_models.hpp"

namespace spinrec {
namespace {

using testing::ConstantScorer;
using testing::LinearScorer;
using testing::OracleMetric;
using testing::random_history;
using testing::random_model;

std::set<ItemId> as_set(std::span<const ItemId> v) { return {v.begin(), v.end()}; }

ExplanationMap random_map(std::size_t n, ItemId y, Rng& rng) {
  ExplanationMap m{y, Vec(static_cast<Eigen::Index>(n)), false};
  // Coarse values so ties occur and the index tie-break is exercised.
  for (auto& v : m.scores) v = static_cast<double>(uniform_index(rng, 5));
  return m;
}

TEST(TopKMaskTest, WholeHistoryAndTies) {
  const UserVector x({1, 4, 6}, 8);
  ExplanationMap map{0, Vec::Constant(8, 0.3), false};
  EXPECT_EQ(top_k_mask(map, x, 5).selected, (std::vector<ItemId>{1, 4, 6}));
  EXPECT_EQ(top_k_mask(map, x, 2).selected, (std::vector<ItemId>{1, 4}));
  map.scores[6] = 1.0;
  map.scores[2] = 9.0;  // not in the history
  EXPECT_EQ(top_k_mask(map, x, 2).selected, (std::vector<ItemId>{1, 6}));
  EXPECT_TRUE(top_k_mask(map, x, 0).selected.empty());
  EXPECT_THROW(top_k_mask(map, UserVector::empty(8), 1), FidelityError);
}

TEST(TopKMaskTest, MatchesSortAndTakeOracle) {
  // [DERIVED] sort-and-take oracle.
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_history(20, 1 + uniform_index(rng, 8), rng);
    const auto map = random_map(20, 0, rng);
    const std::size_t k = 1 + uniform_index(rng, 6);
    auto order = testing::oracle_order(map.scores, as_set(x.items()));
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    EXPECT_EQ(top_k_mask(map, x, k).selected, order);
  }
}

TEST(PerturbTest, PartitionAndErrors) {
  const UserVector x({0, 3, 5, 7}, 10);
  EXPECT_TRUE(perturb(x, {{0, 3, 5, 7}, 4}, PerturbMode::kRemove).empty());
  EXPECT_THROW(perturb(x, {{1}, 1}, PerturbMode::kRemove), FidelityError);

  // [DERIVED] set-algebra oracle.
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto h = random_history(25, 1 + uniform_index(rng, 10), rng);
    const auto mask = top_k_mask(random_map(25, 0, rng), h, uniform_index(rng, 12));
    const auto kept = as_set(perturb(h, mask, PerturbMode::kRetain).items());
    const auto rest = as_set(perturb(h, mask, PerturbMode::kRemove).items());
    std::set<ItemId> expected_rest = as_set(h.items());
    for (ItemId i : mask.selected) expected_rest.erase(i);
    EXPECT_EQ(kept, as_set(mask.selected));
    EXPECT_EQ(rest, expected_rest);
    std::set<ItemId> both = kept;
    both.insert(rest.begin(), rest.end());
    EXPECT_EQ(both, as_set(h.items()));
    EXPECT_EQ(kept.size() + rest.size(), h.size());
  }
}

TEST(PosTest, TrivialCases) {
  Vec c = Vec::LinSpaced(10, 1.0, 0.1);  // item 0 scores highest
  LinearScorer m(Eigen::MatrixXd::Zero(10, 10), c);
  const UserVector x({3, 4}, 10);
  ExplanationMap map{0, Vec::Zero(10), false};
  EXPECT_EQ(pos_at(m, x, 0, map, 1, 1), 1);
  EXPECT_EQ(pos_at(m, x, 9, map, 5, 2), 0);
  // One history item stays excluded, so k_r = 9 covers every candidate.
  for (ItemId y = 0; y < 10; ++y) EXPECT_EQ(pos_at(m, x, y, map, 9, 1), 1);
}

TEST(PosTest, SingleRemovalsMatchRankOracle) {
  // [DERIVED] brute-force rank oracle: every single-item removal on a 30-item model.
  auto m = random_model(ModelKind::kMF, 30, 12, 1.0);
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_history(30, 6, rng);
    const ItemId y = recommend_top1(*m, x);
    for (ItemId removed : x.items()) {
      ExplanationMap map{y, Vec::Zero(30), false};
      map.scores[removed] = 1.0;
      auto rest = as_set(x.items());
      rest.erase(removed);
      const std::size_t rank = testing::oracle_rank(*m, rest, y, rest);
      for (std::size_t k_r : {1, 2, 5}) EXPECT_EQ(pos_at(*m, x, y, map, k_r, 1), rank <= k_r ? 1 : 0);
      EXPECT_DOUBLE_EQ(cdcg_at(*m, x, y, map, 1), 1.0 / std::log2(1.0 + rank));
    }
  }
}

TEST(RankExclusionTest, Options) {
  Vec c(5);
  c << 0.5, 0.9, 0.8, 0.1, 0.2;
  LinearScorer m(Eigen::MatrixXd::Zero(5, 5), c);
  const UserVector x({1, 2}, 5);
  ExplanationMap map{0, Vec::Zero(5), false};
  map.scores[1] = 1.0;
  // Item 1 is removed: it re-enters the pool by default but not under the original-history rule.
  EXPECT_DOUBLE_EQ(cdcg_at(m, x, 0, map, 1), 1.0 / std::log2(3.0));
  EXPECT_DOUBLE_EQ(cdcg_at(m, x, 0, map, 1, {RankExclusion::kOriginalHistory}), 1.0);
  EXPECT_DOUBLE_EQ(cdcg_at(m, x, 0, map, 1, {RankExclusion::kNone}), 1.0 / std::log2(4.0));
}

TEST(DelInsTest, TrivialCases) {
  ConstantScorer flat(12, 0.4);
  Rng rng(6);
  const auto x = random_history(12, 5, rng);
  const auto map = random_map(12, 0, rng);
  for (std::size_t k : {0, 1, 3, 5, 9}) {
    EXPECT_DOUBLE_EQ(del_at(flat, x, 0, map, k), 1.0);
    EXPECT_DOUBLE_EQ(ins_at(flat, x, 0, map, k), 1.0);
  }
  auto m = random_model(ModelKind::kNCF, 12, 2);
  EXPECT_DOUBLE_EQ(del_at(*m, x, 3, map, 0), 1.0);
  EXPECT_DOUBLE_EQ(ins_at(*m, x, 3, map, x.size()), 1.0);
  EXPECT_THROW(del_at(ConstantScorer(12, 0.0), x, 0, map, 1), FidelityError);
}

TEST(DelInsTest, FullRemovalIsColdUserRatio) {
  // [DERIVED] direct evaluation oracle.
  auto m = random_model(ModelKind::kMF, 40, 5);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_history(40, 1 + uniform_index(rng, 10), rng);
    const ItemId y = recommend_top1(*m, x);
    const auto map = random_map(40, y, rng);
    const double expected = m->score(Vec::Zero(40), y) / m->score(x.dense(), y);
    EXPECT_NEAR(del_at(*m, x, y, map, x.size()), expected, 1e-15);
  }
}

TEST(DelInsTest, VaeInsertionCanExceedOne) {
  auto m = random_model(ModelKind::kVAE, 30, 7, 1.5);
  Rng rng(3);
  bool above = false;
  for (int trial = 0; trial < 200 && !above; ++trial) {
    const auto x = random_history(30, 8, rng);
    const ItemId y = recommend_top1(*m, x);
    above = ins_at(*m, x, y, random_map(30, y, rng), 2) > 1.0;
  }
  EXPECT_TRUE(above);
}

TEST(DelInsTest, DeletionMonotoneOnNonNegativeLinearScorer) {
  Rng rng(13);
  Eigen::MatrixXd w(15, 15);
  for (auto& v : w.reshaped()) v = uniform01(rng);
  LinearScorer m(w, Vec::Constant(15, 0.1));
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_history(15, 6, rng);
    const auto map = random_map(15, 0, rng);
    double prev = 1.0;
    for (std::size_t k = 1; k <= 6; ++k) {
      const double d = del_at(m, x, 0, map, k);
      EXPECT_LE(d, prev);
      prev = d;
    }
  }
}

TEST(CdcgTest, RankOneAndThree) {
  Vec c(6);
  c << 0.9, 0.8, 0.7, 0.6, 0.5, 0.4;
  LinearScorer m(Eigen::MatrixXd::Zero(6, 6), c);
  const UserVector x({5}, 6);
  ExplanationMap map{0, Vec::Zero(6), false};
  EXPECT_DOUBLE_EQ(cdcg_at(m, x, 0, map, 1), 1.0);
  EXPECT_DOUBLE_EQ(cdcg_at(m, x, 2, map, 1), 0.5);
}

TEST(MetricOracleTest, RandomModelsMatchBruteForce) {
  // [DERIVED] brute-force re-implementation that rescores from scratch.
  Rng rng(21);
  for (ModelKind kind : {ModelKind::kMF, ModelKind::kNCF, ModelKind::kVAE}) {
    auto m = random_model(kind, 20, 30 + static_cast<int>(kind));
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_history(20, 1 + uniform_index(rng, 6), rng);
      const ItemId y = recommend_top1(*m, x);
      const auto map = random_map(20, y, rng);
      const auto h = as_set(x.items());
      for (std::size_t k_e = 1; k_e <= 4; ++k_e) {
        EXPECT_EQ(del_at(*m, x, y, map, k_e), testing::oracle_metric(*m, h, y, map.scores, OracleMetric::kDel, 0, k_e));
        EXPECT_EQ(ins_at(*m, x, y, map, k_e), testing::oracle_metric(*m, h, y, map.scores, OracleMetric::kIns, 0, k_e));
        EXPECT_EQ(cdcg_at(*m, x, y, map, k_e),
                  testing::oracle_metric(*m, h, y, map.scores, OracleMetric::kCdcg, 0, k_e));
        EXPECT_EQ(pos_at(*m, x, y, map, 5, k_e), testing::oracle_metric(*m, h, y, map.scores, OracleMetric::kPos, 5, k_e));
      }
      EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kDel, 0}),
                testing::oracle_auc(*m, h, y, map.scores, OracleMetric::kDel, 0));
      EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kPos, 10}),
                testing::oracle_auc(*m, h, y, map.scores, OracleMetric::kPos, 10));
    }
  }
}

TEST(AucTest, SingleItemHistory) {
  auto m = random_model(ModelKind::kNCF, 10, 4);
  const UserVector x({6}, 10);
  const ItemId y = recommend_top1(*m, x);
  ExplanationMap map{y, Vec::Zero(10), false};
  EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kDel, 0}), del_at(*m, x, y, map, 1));
  EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kIns, 0}), ins_at(*m, x, y, map, 1));
  EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kCdcg, 0}), cdcg_at(*m, x, y, map, 1));
  EXPECT_EQ(auc_curve(*m, x, y, map, {MetricKind::kPos, 5}), pos_at(*m, x, y, map, 5, 1));
  EXPECT_THROW(auc_curve(*m, UserVector::empty(10), y, map, {MetricKind::kDel, 0}), FidelityError);
}

TEST(AucTest, ConstantScorerAndFourStepOracle) {
  ConstantScorer flat(10, 0.3);
  const UserVector x({1, 2, 3, 4}, 10);
  Rng rng(1);
  EXPECT_DOUBLE_EQ(auc_curve(flat, x, 0, random_map(10, 0, rng), {MetricKind::kDel, 0}), 1.0);

  // [DERIVED] step-by-step oracle: mean of 4 independently computed values.
  auto m = random_model(ModelKind::kVAE, 10, 3);
  const auto map = random_map(10, 7, rng);
  for (MetricKind kind : {MetricKind::kDel, MetricKind::kIns, MetricKind::kCdcg}) {
    double sum = 0;
    for (std::size_t k = 1; k <= 4; ++k) sum += metric_at(*m, x, 7, map, {kind, 0}, k);
    EXPECT_NEAR(auc_curve(*m, x, 7, map, {kind, 0}), sum / 4, 1e-15);
  }
}

TEST(AucTest, StrideAndBudget) {
  EXPECT_EQ(auc_steps(7, 1), (std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(auc_steps(7, 3), (std::vector<std::size_t>{3, 6}));
  EXPECT_EQ(auc_steps(7, 1, 3), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_THROW(auc_steps(7, 0), FidelityError);

  auto m = random_model(ModelKind::kMF, 30, 8);
  Rng rng(4);
  const auto x = random_history(30, 9, rng);
  const ItemId y = recommend_top1(*m, x);
  const auto map = random_map(30, y, rng);
  FidelityOptions opts;
  opts.stride = 4;
  const double strided = auc_curve(*m, x, y, map, {MetricKind::kDel, 0}, opts);
  EXPECT_NEAR(strided, (del_at(*m, x, y, map, 4) + del_at(*m, x, y, map, 8)) / 2, 1e-15);
}

TEST(PerturbationCurvesTest, AgreesWithDirectMetrics) {
  auto m = random_model(ModelKind::kNCF, 25, 14);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_history(25, 1 + uniform_index(rng, 8), rng);
    const ItemId y = recommend_top1(*m, x);
    const auto map = random_map(25, y, rng);
    FidelityOptions opts;
    opts.stride = 1 + uniform_index(rng, 2);
    const auto curves = perturbation_curves(*m, x, y, map, opts, true, {2, 3, 4});
    for (MetricSpec metric : {MetricSpec{MetricKind::kPos, 5}, MetricSpec{MetricKind::kDel, 0},
                              MetricSpec{MetricKind::kIns, 0}, MetricSpec{MetricKind::kCdcg, 0}}) {
      EXPECT_DOUBLE_EQ(curves.auc(metric), auc_curve(*m, x, y, map, metric, opts));
      for (std::size_t k : {2, 3, 4}) EXPECT_DOUBLE_EQ(curves.value_at(metric, k), metric_at(*m, x, y, map, metric, k, opts));
    }
  }
  const auto no_ranks = perturbation_curves(*m, UserVector({1, 2}, 25), 0, ExplanationMap{0, Vec::Zero(25), false}, {}, false);
  EXPECT_THROW(no_ranks.auc({MetricKind::kPos, 5}), FidelityError);
}

TEST(SelectorTest, DirectionAndBudget) {
  ConstantScorer flat(8, 0.2);
  const UserVector x({0, 1, 2}, 8);
  ExplanationMap map{5, Vec::Zero(8), false};
  EXPECT_DOUBLE_EQ(evaluate_selector(FidelitySelector::deletion(), flat, x, 5, map), -1.0);

  auto m = random_model(ModelKind::kMF, 20, 9);
  Rng rng(5);
  const auto h = random_history(20, 6, rng);
  const ItemId y = recommend_top1(*m, h);
  const auto rmap = random_map(20, y, rng);
  const double full = auc_curve(*m, h, y, rmap, {MetricKind::kDel, 0});
  EXPECT_EQ(evaluate_selector(FidelitySelector::deletion(), *m, h, y, rmap), -full);
  EXPECT_EQ(evaluate_selector(FidelitySelector::deletion(6), *m, h, y, rmap), -full);
  EXPECT_EQ(evaluate_selector(FidelitySelector::deletion(2), *m, h, y, rmap),
            -auc_curve(*m, h, y, rmap, {MetricKind::kDel, 0}, {}, 2));
  EXPECT_EQ(evaluate_selector(FidelitySelector::for_metric({MetricKind::kIns, 0}), *m, h, y, rmap),
            auc_curve(*m, h, y, rmap, {MetricKind::kIns, 0}));
  EXPECT_THROW(FidelitySelector::deletion(0), FidelityError);
}

TEST(MetricSpecTest, LabelsAndParsing) {
  EXPECT_EQ((MetricSpec{MetricKind::kPos, 5}).label(), "pos@5");
  EXPECT_EQ((MetricSpec{MetricKind::kCdcg, 0}).label(), "cdcg");
  EXPECT_EQ(parse_metric_kind("DEL"), MetricKind::kDel);
  EXPECT_THROW(parse_metric_kind("ndcg"), FidelityError);
  EXPECT_FALSE((MetricSpec{MetricKind::kIns, 0}).lower_is_better());
}

}  // namespace
}  // namespace spinrec
