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

#pragma once

// Brute-force metric implementations that rescore from scratch at every step.
// They only use the public scoring calls and plain std containers.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "spinrec/recommender.hpp"

namespace spinrec::testing {

inline Vec dense_of(const std::set<ItemId>& items, std::size_t n) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(n));
  for (ItemId i : items) v[i] = 1.0;
  return v;
}

// History items by descending score; equal scores by ascending index.
inline std::vector<ItemId> oracle_order(const Vec& scores, const std::set<ItemId>& history) {
  std::vector<ItemId> order(history.begin(), history.end());
  std::sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

// Position of y after sorting the candidate pool by (score desc, index asc).
inline std::size_t oracle_rank(const Recommender& model, const std::set<ItemId>& input, ItemId y,
                               const std::set<ItemId>& excluded) {
  const Vec s = model.score_all(dense_of(input, model.num_items()));
  std::vector<ItemId> pool;
  for (ItemId i = 0; i < model.num_items(); ++i)
    if (i == y || !excluded.count(i)) pool.push_back(i);
  std::sort(pool.begin(), pool.end(), [&](ItemId a, ItemId b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  return static_cast<std::size_t>(std::find(pool.begin(), pool.end(), y) - pool.begin()) + 1;
}

struct OracleStep {
  std::set<ItemId> removed_vec;   // history without the top k
  std::set<ItemId> retained_vec;  // only the top k
};

inline OracleStep oracle_step(const std::vector<ItemId>& order, std::size_t k) {
  OracleStep s;
  for (std::size_t i = 0; i < order.size(); ++i) (i < k ? s.retained_vec : s.removed_vec).insert(order[i]);
  return s;
}

enum class OracleMetric { kPos, kDel, kIns, kCdcg };

inline double oracle_metric(const Recommender& model, const std::set<ItemId>& history, ItemId y,
                            const Vec& map_scores, OracleMetric metric, std::size_t k_r, std::size_t k_e) {
  const auto order = oracle_order(map_scores, history);
  const auto step = oracle_step(order, std::min(k_e, order.size()));
  const std::size_t n = model.num_items();
  const double base = model.score(dense_of(history, n), y);
  switch (metric) {
    case OracleMetric::kPos:
      return oracle_rank(model, step.removed_vec, y, step.removed_vec) <= k_r ? 1.0 : 0.0;
    case OracleMetric::kCdcg:
      return 1.0 / std::log2(1.0 + static_cast<double>(oracle_rank(model, step.removed_vec, y, step.removed_vec)));
    case OracleMetric::kDel:
      return model.score(dense_of(step.removed_vec, n), y) / base;
    case OracleMetric::kIns:
      return model.score(dense_of(step.retained_vec, n), y) / base;
  }
  return 0.0;
}

// Mean of the metric after 1, 2, ..., H items.
inline double oracle_auc(const Recommender& model, const std::set<ItemId>& history, ItemId y, const Vec& map_scores,
                         OracleMetric metric, std::size_t k_r) {
  double sum = 0.0;
  for (std::size_t k = 1; k <= history.size(); ++k) sum += oracle_metric(model, history, y, map_scores, metric, k_r, k);
  return sum / static_cast<double>(history.size());
}

}  // namespace spinrec::testing
