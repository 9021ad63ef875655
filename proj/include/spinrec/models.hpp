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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "spinrec/recommender.hpp"

namespace spinrec {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// Recommender whose parameters live in one flat vector, carved into named
/// blocks. Training, optimizers and checkpoints work on the flat vector.
class ParametricModel : public Recommender {
 public:
  std::size_t num_items() const override { return num_items_; }
  std::size_t parameter_count() const override { return static_cast<std::size_t>(params_.size()); }

  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }

  /// Shape descriptor stored in checkpoints; meaning depends on kind().
  virtual std::vector<std::uint32_t> dims() const = 0;

  struct Block {
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };

  template <typename Derived>
  static MatMap mat(Eigen::MatrixBase<Derived>& flat, const Block& b) {
    return {flat.derived().data() + b.offset, b.rows, b.cols};
  }
  template <typename Derived>
  static VecMap vec(Eigen::MatrixBase<Derived>& flat, const Block& b) {
    return {flat.derived().data() + b.offset, b.rows * b.cols};
  }
  ConstMatMap mat(const Block& b) const { return {params_.data() + b.offset, b.rows, b.cols}; }
  ConstVecMap vec(const Block& b) const { return {params_.data() + b.offset, b.rows * b.cols}; }

 protected:
  explicit ParametricModel(std::size_t num_items) : num_items_(num_items) {}

  Block add_block(Eigen::Index rows, Eigen::Index cols);
  void allocate() { params_ = Vec::Zero(next_offset_); }

  std::size_t num_items_;
  Vec params_;

 private:
  Eigen::Index next_offset_ = 0;
};

/// Mean-pooled user embedding p(x) = W^T x / max(1, sum x) and its adjoint.
struct PooledUser {
  Vec p;
  double mass = 0.0;        // sum of x
  double normalizer = 1.0;  // max(1, mass)
};
PooledUser pool_user(const ConstMatMap& item_input, const VecRef& x);
/// Back-propagates dL/dp to dL/dx through the pooling.
Vec pool_user_backward(const ConstMatMap& item_input, const PooledUser& pooled, const Vec& grad_p);

/// Matrix factorization with user embedding derived from the interaction vector:
/// score_y = sigmoid(p(x) . q_y + b_y).
class MFModel final : public ParametricModel {
 public:
  MFModel(std::size_t num_items, std::size_t dim);

  ModelKind kind() const override { return ModelKind::kMF; }
  std::vector<std::uint32_t> dims() const override { return {static_cast<std::uint32_t>(dim_)}; }
  std::size_t dim() const { return dim_; }
  Eigen::MatrixXd item_embeddings() const override { return item_output(); }

  ConstMatMap item_input() const { return mat(w_); }
  ConstMatMap item_output() const { return mat(q_); }
  ConstVecMap item_bias() const { return vec(b_); }

  template <typename Derived>
  MatMap item_input(Eigen::MatrixBase<Derived>& flat) const { return mat(flat, w_); }
  template <typename Derived>
  MatMap item_output(Eigen::MatrixBase<Derived>& flat) const { return mat(flat, q_); }
  template <typename Derived>
  VecMap item_bias(Eigen::MatrixBase<Derived>& flat) const { return vec(flat, b_); }

 protected:
  Vec do_score_all(const VecRef& x) const override;
  double do_score(const VecRef& x, ItemId y) const override;
  Vec do_grad_input(const VecRef& x, ItemId y) const override;

 private:
  std::size_t dim_;
  Block w_, q_, b_;
};

/// Neural CF: generalized-MF term plus a two-layer tanh MLP over [p(x); q_y].
class NCFModel final : public ParametricModel {
 public:
  NCFModel(std::size_t num_items, std::size_t dim, std::size_t hidden1, std::size_t hidden2);

  ModelKind kind() const override { return ModelKind::kNCF; }
  std::vector<std::uint32_t> dims() const override;
  Eigen::MatrixXd item_embeddings() const override { return mat(q_); }

  std::size_t dim() const { return dim_; }
  std::size_t hidden1() const { return h1_; }
  std::size_t hidden2() const { return h2_; }

  /// Logit and the adjoints needed by training; exposed so the trainer and
  /// grad_input share one backward pass.
  struct Forward {
    double logit;
    Vec z1, a1, z2, a2;
  };
  Forward forward(const Vec& p, ItemId y) const;
  /// Accumulates dL/dparams into flat_grad (scaled by dlogit) and returns dL/dp.
  Vec backward(const Vec& p, ItemId y, const Forward& fw, double dlogit, Vec* flat_grad) const;

  ConstMatMap item_input() const { return mat(w_); }

  Block w_, q_, gmf_, l1_, b1_, l2_, b2_, out_, bout_, bias_;

 protected:
  Vec do_score_all(const VecRef& x) const override;
  double do_score(const VecRef& x, ItemId y) const override;
  Vec do_grad_input(const VecRef& x, ItemId y) const override;

 private:
  std::size_t dim_, h1_, h2_;
};

/// Multinomial VAE. Inference uses the encoder mean; scores are softmax
/// probabilities over all items.
class VAEModel final : public ParametricModel {
 public:
  VAEModel(std::size_t num_items, std::size_t hidden, std::size_t latent);

  ModelKind kind() const override { return ModelKind::kVAE; }
  std::vector<std::uint32_t> dims() const override;
  Eigen::MatrixXd item_embeddings() const override { return mat(dec2_); }

  std::size_t hidden() const { return hidden_; }
  std::size_t latent() const { return latent_; }

  /// Input scaling x / sqrt(max(1, sum x)).
  static double input_scale(double mass) { return 1.0 / std::sqrt(std::max(1.0, mass)); }

  Block enc1_, enc1_b_, mu_, mu_b_, logvar_, logvar_b_, dec1_, dec1_b_, dec2_, dec2_b_;

 protected:
  Vec do_score_all(const VecRef& x) const override;
  Vec do_grad_input(const VecRef& x, ItemId y) const override;

 private:
  std::size_t hidden_, latent_;
};

/// Flat checkpoint: magic, kind, item count, dims, parameter count, then
/// little-endian float32 parameters.
void save_checkpoint(const ParametricModel& model, const std::filesystem::path& path);
std::shared_ptr<ParametricModel> load_checkpoint(const std::filesystem::path& path);

std::shared_ptr<ParametricModel> make_model(ModelKind kind, std::size_t num_items,
                                            const std::vector<std::uint32_t>& dims);

}  // namespace spinrec
