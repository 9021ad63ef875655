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

#include "spinrec/recommender.hpp"

#include <string>

namespace spinrec {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMF:
      return "mf";
    case ModelKind::kNCF:
      return "ncf";
    case ModelKind::kVAE:
      return "vae";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "mf" || name == "MF") return ModelKind::kMF;
  if (name == "ncf" || name == "NCF") return ModelKind::kNCF;
  if (name == "vae" || name == "VAE") return ModelKind::kVAE;
  throw ModelError("unknown model kind '" + std::string(name) + "' (expected mf, ncf or vae)");
}

void Recommender::check_input(const VecRef& x) const {
  if (static_cast<std::size_t>(x.size()) != num_items()) {
    throw ModelError("input dimension " + std::to_string(x.size()) + " != number of items " +
                     std::to_string(num_items()));
  }
}

void Recommender::check_item(ItemId y) const {
  if (y >= num_items()) throw ModelError("target item " + std::to_string(y) + " out of range");
}

Vec Recommender::score_all(const VecRef& x) const {
  check_input(x);
  return do_score_all(x);
}

double Recommender::score(const VecRef& x, ItemId y) const {
  check_input(x);
  check_item(y);
  return do_score(x, y);
}

Vec Recommender::grad_input(const VecRef& x, ItemId y) const {
  check_input(x);
  check_item(y);
  return do_grad_input(x, y);
}

Eigen::MatrixXd Recommender::item_embeddings() const {
  throw ModelError(std::string(to_string(kind())) + " model exposes no item embeddings");
}

std::size_t rank_in_scores(const Vec& scores, ItemId y, const UserVector* excluded) {
  const double target = scores[y];
  std::size_t rank = 1;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto item = static_cast<ItemId>(i);
    if (item == y) continue;
    if (excluded != nullptr && excluded->contains(item)) continue;
    if (scores[i] > target || (scores[i] == target && item < y)) ++rank;
  }
  return rank;
}

std::size_t rank_of(const Recommender& model, const UserVector& x, ItemId y, CandidatePool pool) {
  const Vec scores = model.score_all(x.dense());
  if (y >= scores.size()) throw ModelError("target item out of range");
  return rank_in_scores(scores, y, pool == CandidatePool::kExcludeHistory ? &x : nullptr);
}

ItemId recommend_top1(const Recommender& model, const UserVector& x) {
  if (x.size() >= model.num_items()) throw ModelError("history covers every item; nothing to recommend");
  const Vec scores = model.score_all(x.dense());
  ItemId best = 0;
  bool found = false;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto item = static_cast<ItemId>(i);
    if (x.contains(item)) continue;
    if (!found || scores[i] > scores[best]) {
      best = item;
      found = true;
    }
  }
  return best;
}

}  // namespace spinrec
