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

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "spinrec/models.hpp"
#include "spinrec/random.hpp"
#include "spinrec/recommender.hpp"

namespace spinrec::testing {

// score_y(x) = w_y . x + c_y with one weight row per target item.
class LinearScorer final : public Recommender {
 public:
  LinearScorer(Eigen::MatrixXd weights, Vec bias) : w_(std::move(weights)), c_(std::move(bias)) {}

  ModelKind kind() const override { return ModelKind::kMF; }
  std::size_t num_items() const override { return static_cast<std::size_t>(w_.rows()); }
  std::size_t parameter_count() const override { return static_cast<std::size_t>(w_.size() + c_.size()); }
  Eigen::MatrixXd item_embeddings() const override { return w_; }

  const Eigen::MatrixXd& weights() const { return w_; }

 protected:
  Vec do_score_all(const VecRef& x) const override { return w_ * x + c_; }
  Vec do_grad_input(const VecRef&, ItemId y) const override { return w_.row(y).transpose(); }

 private:
  Eigen::MatrixXd w_;
  Vec c_;
};

class ConstantScorer final : public Recommender {
 public:
  ConstantScorer(std::size_t num_items, double value) : n_(num_items), value_(value) {}

  ModelKind kind() const override { return ModelKind::kMF; }
  std::size_t num_items() const override { return n_; }
  std::size_t parameter_count() const override { return 1; }

 protected:
  Vec do_score_all(const VecRef&) const override { return Vec::Constant(static_cast<Eigen::Index>(n_), value_); }
  Vec do_grad_input(const VecRef&, ItemId) const override { return Vec::Zero(static_cast<Eigen::Index>(n_)); }

 private:
  std::size_t n_;
  double value_;
};

// Small model of the given kind with every parameter drawn from N(0, scale^2).
inline std::shared_ptr<ParametricModel> random_model(ModelKind kind, std::size_t num_items, std::uint64_t seed,
                                                     double scale = 0.5) {
  auto model = make_model(kind, num_items, kind == ModelKind::kMF    ? std::vector<std::uint32_t>{8}
                                           : kind == ModelKind::kNCF ? std::vector<std::uint32_t>{8, 12, 6}
                                                                     : std::vector<std::uint32_t>{12, 5});
  Rng rng(seed);
  for (auto& p : model->mutable_params()) p = scale * standard_normal(rng);
  return model;
}

inline UserVector random_history(std::size_t num_items, std::size_t size, Rng& rng) {
  std::vector<ItemId> all(num_items);
  for (ItemId i = 0; i < num_items; ++i) all[i] = i;
  for (std::size_t i = 0; i < size; ++i) std::swap(all[i], all[i + uniform_index(rng, num_items - i)]);
  all.resize(size);
  return UserVector(std::move(all), num_items);
}

}  // namespace spinrec::testing
