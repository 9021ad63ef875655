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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spinrec/dataset.hpp"
#include "spinrec/models.hpp"

namespace spinrec {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t dim = 32;                        // MF / NCF embedding size
  std::vector<std::size_t> hidden = {64, 32};  // NCF MLP widths; VAE uses hidden[0]
  std::size_t latent = 32;                     // VAE latent size
  double learning_rate = 1e-2;
  std::size_t epochs = 20;
  std::size_t negatives = 4;  // per positive, MF / NCF only
  std::size_t batch_size = 64;  // users per optimizer step
  std::uint64_t seed = 42;
  double weight_decay = 1e-5;
  double input_dropout = 0.5;
  double kl_beta = 0.2;  // VAE KL weight after annealing
  std::size_t kl_anneal_steps = 2000;
  std::size_t max_targets_per_user = 64;

  void validate() const;
  /// Defaults for a model kind (VAE: hidden 128, latent 32, lr 1e-3).
  static TrainConfig defaults_for(ModelKind kind);
};

struct TrainReport {
  std::vector<double> epoch_loss;
  // Recall@10 on validation users with 20% of their items held out; NaN when
  // there are no validation users.
  double validation_recall_at_10 = 0.0;
};

struct TrainedModel {
  std::shared_ptr<const ParametricModel> model;
  TrainReport report;
};

/// Builds a randomly initialised model of the configured shape.
std::shared_ptr<ParametricModel> initialize_model(ModelKind kind, std::size_t num_items, const TrainConfig& cfg);

/// Trains on train-split users. MF / NCF minimise binary cross-entropy of
/// held-out positives against uniform negatives; VAE minimises multinomial
/// negative log-likelihood plus an annealed KL term. Deterministic in cfg.seed.
TrainedModel train(ModelKind kind, const InteractionDataset& ds, const TrainConfig& cfg);

/// Recall@k over users in `split`, holding out 20% of each history (at least one item).
double holdout_recall(const Recommender& model, const InteractionDataset& ds, Split split, std::size_t k,
                      std::uint64_t seed);

}  // namespace spinrec
