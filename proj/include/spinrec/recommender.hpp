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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "spinrec/dataset.hpp"

namespace spinrec {

using Vec = Eigen::VectorXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;

enum class ModelKind : std::uint32_t { kMF = 0, kNCF = 1, kVAE = 2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scoring function over relaxed user vectors x in [0,1]^|items| with exact
/// input gradients. Implementations are immutable once built, so every query
/// is safe from concurrent callers.
class Recommender {
 public:
  virtual ~Recommender() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t num_items() const = 0;
  virtual std::size_t parameter_count() const = 0;

  Vec score_all(const VecRef& x) const;
  double score(const VecRef& x, ItemId y) const;
  /// d score_y / d x, evaluated at a (possibly fractional) input.
  Vec grad_input(const VecRef& x, ItemId y) const;

  /// Row i is item i's embedding used by similarity explainers.
  virtual Eigen::MatrixXd item_embeddings() const;

 protected:
  virtual Vec do_score_all(const VecRef& x) const = 0;
  virtual double do_score(const VecRef& x, ItemId y) const { return do_score_all(x)[y]; }
  virtual Vec do_grad_input(const VecRef& x, ItemId y) const = 0;

 private:
  void check_input(const VecRef& x) const;
  void check_item(ItemId y) const;
};

/// Which history is removed from the ranking candidate pool.
enum class CandidatePool {
  kAllItems,         // rank among every item
  kExcludeHistory,   // drop the items of the vector being scored
};

/// 1-based rank of y among candidates; ties resolve to the lower item index.
/// y is always a candidate even when it belongs to the excluded history.
std::size_t rank_of(const Recommender& model, const UserVector& x, ItemId y,
                    CandidatePool pool = CandidatePool::kExcludeHistory);

/// Same rule applied to precomputed scores and an explicit exclusion set.
std::size_t rank_in_scores(const Vec& scores, ItemId y, const UserVector* excluded);

/// Highest-scoring item outside x's history, ties to the lower index.
ItemId recommend_top1(const Recommender& model, const UserVector& x);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace spinrec
