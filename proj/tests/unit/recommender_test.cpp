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

#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "spinrec/models.hpp"
#include "spinrec/random.hpp"
#include "spinrec/training.hpp"
#include "test_models.hpp"

namespace spinrec {
namespace {

using testing::ConstantScorer;
using testing::oracle_rank;
using testing::random_history;
using testing::random_model;

constexpr ModelKind kAllKinds[] = {ModelKind::kMF, ModelKind::kNCF, ModelKind::kVAE};

std::set<ItemId> as_set(const UserVector& v) { return {v.items().begin(), v.items().end()}; }

TEST(MFModelTest, HandComputedScore) {
  MFModel m(2, 1);
  Vec& p = m.mutable_params();
  m.item_input(p) << 1.0, 2.0;
  m.item_output(p) << 1.0, 1.0;
  m.item_bias(p).setZero();
  const Vec x = UserVector({0, 1}, 2).dense();
  // [DERIVED] hand arithmetic: p = (1 + 2) / 2 = 1.5, score = sigmoid(1.5).
  const double expected = 0.8175744761936437;
  EXPECT_NEAR(m.score(x, 0), expected, 1e-12);
  EXPECT_NEAR(m.score_all(x)[1], expected, 1e-12);
}

TEST(MFModelTest, ColdUserScoresAreBiasSigmoids) {
  auto m = random_model(ModelKind::kMF, 12, 3);
  auto& mf = dynamic_cast<MFModel&>(*m);
  const Vec scores = mf.score_all(Vec::Zero(12));
  for (ItemId y = 0; y < 12; ++y) EXPECT_NEAR(scores[y], sigmoid(mf.item_bias()[y]), 1e-15);
}

TEST(MFModelTest, ColdUserGradient) {
  auto m = random_model(ModelKind::kMF, 12, 4);
  auto& mf = dynamic_cast<MFModel&>(*m);
  const ItemId y = 5;
  const Vec g = mf.grad_input(Vec::Zero(12), y);
  // [DERIVED] symbolic differentiation with normalizer max(1, 0) = 1:
  // d/dx_i sigmoid(b_y + q_y . W^T x) = sigmoid'(b_y) * (W_i . q_y).
  const double s = sigmoid(mf.item_bias()[y]);
  for (ItemId i = 0; i < 12; ++i) {
    const double expected = s * (1 - s) * mf.item_input().row(i).dot(mf.item_output().row(y));
    EXPECT_NEAR(g[i], expected, 1e-14);
  }
}

TEST(RecommenderTest, OutputRanges) {
  Rng rng(17);
  for (ModelKind kind : kAllKinds) {
    auto m = random_model(kind, 25, 9);
    for (int trial = 0; trial < 20; ++trial) {
      Vec x(25);
      for (auto& v : x) v = uniform01(rng);
      const Vec s = m->score_all(x);
      ASSERT_EQ(s.size(), 25);
      EXPECT_TRUE(s.allFinite());
      if (kind == ModelKind::kVAE) {
        EXPECT_NEAR(s.sum(), 1.0, 1e-6);
      } else {
        EXPECT_GT(s.minCoeff(), 0.0);
        EXPECT_LT(s.maxCoeff(), 1.0);
      }
      for (ItemId y : {0u, 7u, 24u}) EXPECT_DOUBLE_EQ(m->score(x, y), s[y]);
    }
  }
}

TEST(RecommenderTest, DimensionChecks) {
  for (ModelKind kind : kAllKinds) {
    auto m = random_model(kind, 10, 1);
    EXPECT_THROW(m->score_all(Vec::Zero(9)), ModelError);
    EXPECT_THROW(m->grad_input(Vec::Zero(11), 0), ModelError);
    EXPECT_THROW(m->grad_input(Vec::Zero(10), 10), ModelError);
  }
}

TEST(RecommenderTest, GradientMatchesFiniteDifferences) {
  // [DERIVED] central finite differences, h = 1e-3.
  Rng rng(23);
  const double h = 1e-3;
  for (ModelKind kind : kAllKinds) {
    auto m = random_model(kind, 30, 5);
    for (int trial = 0; trial < 5; ++trial) {
      Vec x(30);
      for (auto& v : x) v = uniform01(rng);
      const auto y = static_cast<ItemId>(uniform_index(rng, 30));
      const Vec g = m->grad_input(x, y);
      for (Eigen::Index i = 0; i < 30; ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (m->score(xp, y) - m->score(xm, y)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-3 * std::max(std::abs(fd), 1e-6)) << to_string(kind) << " coord " << i;
      }
    }
  }
}

TEST(RankTest, StrictlyHighestIsFirst) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  Vec c(4);
  c << 0.1, 0.9, 0.3, 0.2;
  testing::LinearScorer m(w, c);
  EXPECT_EQ(rank_of(m, UserVector::empty(4), 1), 1u);
  EXPECT_EQ(rank_of(m, UserVector::empty(4), 0), 4u);
  // Excluding the history lifts item 0 over the removed item 2.
  EXPECT_EQ(rank_of(m, UserVector({2}, 4), 0), 3u);
  EXPECT_EQ(rank_of(m, UserVector({2}, 4), 0, CandidatePool::kAllItems), 4u);
}

TEST(RankTest, TiesBreakByIndex) {
  ConstantScorer m(6, 0.5);
  EXPECT_EQ(rank_of(m, UserVector({0, 1}, 6), 2), 1u);
  EXPECT_EQ(rank_of(m, UserVector({0, 1}, 6), 5), 4u);
  // The target stays a candidate even when it is in the history.
  EXPECT_EQ(rank_of(m, UserVector({0, 1}, 6), 1), 1u);
}

TEST(RankTest, MatchesSortOracle) {
  // [DERIVED] sort oracle on a random 50-item model, 100 probes.
  auto m = random_model(ModelKind::kMF, 50, 31, 1.0);
  Rng rng(5);
  for (int probe = 0; probe < 100; ++probe) {
    const auto x = random_history(50, 1 + uniform_index(rng, 10), rng);
    const auto y = static_cast<ItemId>(uniform_index(rng, 50));
    EXPECT_EQ(rank_of(*m, x, y), oracle_rank(*m, as_set(x), y, as_set(x)));
    EXPECT_EQ(rank_of(*m, x, y, CandidatePool::kAllItems), oracle_rank(*m, as_set(x), y, {}));
  }
}

TEST(RankTest, RanksArePermutation) {
  auto m = random_model(ModelKind::kNCF, 20, 8);
  const UserVector x({1, 4, 9}, 20);
  std::set<std::size_t> ranks;
  for (ItemId y = 0; y < 20; ++y)
    if (!x.contains(y)) ranks.insert(rank_of(*m, x, y));
  EXPECT_EQ(ranks.size(), 17u);
  EXPECT_EQ(*ranks.begin(), 1u);
  EXPECT_EQ(*ranks.rbegin(), 17u);
}

TEST(RecommendTop1Test, TieAndSingleCandidate) {
  ConstantScorer m(5, 0.2);
  EXPECT_EQ(recommend_top1(m, UserVector({0, 2}, 5)), 1u);
  EXPECT_EQ(recommend_top1(m, UserVector({0, 1, 2, 4}, 5)), 3u);
  EXPECT_THROW(recommend_top1(m, UserVector({0, 1, 2, 3, 4}, 5)), ModelError);
}

TEST(RecommendTop1Test, MatchesArgmaxOracle) {
  Rng rng(41);
  for (ModelKind kind : kAllKinds) {
    auto m = random_model(kind, 40, 13);
    for (int probe = 0; probe < 30; ++probe) {
      const auto x = random_history(40, 1 + uniform_index(rng, 15), rng);
      ItemId best = 0;
      for (ItemId y = 0; y < 40; ++y)
        if (!x.contains(y) && oracle_rank(*m, as_set(x), y, as_set(x)) == 1) best = y;
      EXPECT_EQ(recommend_top1(*m, x), best);
    }
  }
}

TEST(CheckpointTest, RoundTripAtFloatPrecision) {
  for (ModelKind kind : kAllKinds) {
    auto m = random_model(kind, 15, 2);
    const auto path = std::filesystem::path(::testing::TempDir()) / "model.ckpt";
    save_checkpoint(*m, path);
    auto loaded = load_checkpoint(path);
    ASSERT_EQ(loaded->kind(), kind);
    EXPECT_EQ(loaded->dims(), m->dims());
    ASSERT_EQ(loaded->parameter_count(), m->parameter_count());
    const Vec rounded = m->params().cast<float>().cast<double>();
    EXPECT_EQ(loaded->params(), rounded);
  }
  EXPECT_THROW(make_model(ModelKind::kNCF, 10, {4}), ModelError);
}

InteractionDataset planted_data() {
  return split_users(generate_synthetic({200, 100, 4, 0.6, 0.02, 1}), 0.2, 0.1, 3);
}

TEST(TrainTest, ZeroEpochsReturnsInitializedModel) {
  auto ds = planted_data();
  for (ModelKind kind : kAllKinds) {
    auto cfg = TrainConfig::defaults_for(kind);
    cfg.epochs = 0;
    auto trained = train(kind, ds, cfg);
    EXPECT_EQ(trained.model->params(), initialize_model(kind, ds.num_items(), cfg)->params());
    EXPECT_TRUE(trained.model->score_all(ds.user_vector(0).dense()).allFinite());
  }
}

TEST(TrainTest, SameSeedSameParameters) {
  auto ds = planted_data();
  for (ModelKind kind : kAllKinds) {
    auto cfg = TrainConfig::defaults_for(kind);
    cfg.epochs = 2;
    auto a = train(kind, ds, cfg);
    auto b = train(kind, ds, cfg);
    EXPECT_EQ(a.model->params(), b.model->params());
    cfg.seed += 1;
    EXPECT_NE(a.model->params(), train(kind, ds, cfg).model->params());
  }
}

TEST(TrainTest, MFLearnsPlantedClusters) {
  // [DERIVED] probe: a non-history in-cluster item outranks a random off-cluster item for >= 80% of probes.
  SynthConfig synth{200, 100, 4, 0.6, 0.02, 1};
  auto ds = split_users(generate_synthetic(synth), 0.2, 0.1, 3);
  auto trained = train(ModelKind::kMF, ds, TrainConfig::defaults_for(ModelKind::kMF));
  Rng rng(77);
  int wins = 0, probes = 0;
  for (UserId u : ds.users_in(Split::kTest)) {
    const auto x = ds.user_vector(u);
    const Vec s = trained.model->score_all(x.dense());
    const auto [first, last] = cluster_block(synth, u % synth.num_clusters);
    for (int k = 0; k < 10; ++k) {
      const auto in = static_cast<ItemId>(first + uniform_index(rng, last - first));
      auto out = static_cast<ItemId>(uniform_index(rng, synth.num_items));
      if (x.contains(in) || x.contains(out) || (out >= first && out < last)) continue;
      ++probes;
      wins += s[in] > s[out];
    }
  }
  ASSERT_GT(probes, 100);
  EXPECT_GE(static_cast<double>(wins) / probes, 0.8);
  EXPECT_GT(trained.report.validation_recall_at_10, 0.3);
}

TEST(TrainTest, DivergenceNamesEpoch) {
  auto ds = planted_data();
  auto cfg = TrainConfig::defaults_for(ModelKind::kMF);
  cfg.learning_rate = 1e300;
  cfg.epochs = 3;
  try {
    train(ModelKind::kMF, ds, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, RejectsBadConfig) {
  auto ds = planted_data();
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(train(ModelKind::kMF, ds, cfg), TrainingError);
  EXPECT_THROW(train(ModelKind::kMF, ds.with_splits(std::vector<Split>(ds.num_users(), Split::kTest)), {}),
               TrainingError);
}

}  // namespace
}  // namespace spinrec
