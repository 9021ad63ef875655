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
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "spinrec/dataset.hpp"
#include "spinrec/explanation.hpp"
#include "spinrec/fidelity.hpp"

namespace spinrec {

/// Quadrature node placement for the path integral over t in [0, 1].
enum class IntegrationRule {
  kMidpoint,  // t_j = (j - 1/2) / J
  kLeft,      // t_j = (j - 1) / J
  kRight,     // t_j = j / J
};

std::string_view to_string(IntegrationRule rule);
IntegrationRule parse_integration_rule(std::string_view name);

/// Straight-line path r(t) = t x + (1 - t) z from baseline z.
struct PathSpec {
  Vec baseline;
  std::size_t steps = 64;
  IntegrationRule rule = IntegrationRule::kMidpoint;

  static PathSpec from(const UserVector& z, std::size_t steps = 64,
                       IntegrationRule rule = IntegrationRule::kMidpoint) {
    return {z.dense(), steps, rule};
  }
};

/// m = (x - z) * (1/J) sum_j grad f_y(r(t_j)).
ExplanationMap path_integrate(const Recommender& model, const VecRef& x, ItemId y, const PathSpec& path);
ExplanationMap path_integrate(const Recommender& model, const UserVector& x, ItemId y, const PathSpec& path);

/// Coordinate-wise mean of maps that share a target and dimension.
ExplanationMap mean_map(std::span<const ExplanationMap> maps);

struct SpinRecConfig {
  std::size_t kappa = 10;
  std::size_t steps = 64;
  IntegrationRule rule = IntegrationRule::kMidpoint;
  bool include_zero_baseline = true;
  // Adds the mean of the per-baseline maps as one more candidate.
  bool use_mean_map = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SpinRecResult {
  ExplanationMap map;
  std::size_t selected_index = 0;  // index into the candidate list
  double selector_score = 0.0;
  std::vector<double> candidate_scores;  // one per baseline, then the mean map if enabled
};

using MapScorer = std::function<double(const ExplanationMap&)>;

/// One path-integration map per baseline (plus the mean map when enabled);
/// returns the candidate with the highest score, ties to the lowest index.
SpinRecResult spinrec_explain(const Recommender& model, const UserVector& x, ItemId y,
                              std::span<const UserVector> baselines, const SpinRecConfig& cfg,
                              const MapScorer& scorer);

SpinRecResult spinrec_explain(const Recommender& model, const UserVector& x, ItemId y,
                              std::span<const UserVector> baselines, const SpinRecConfig& cfg,
                              const FidelitySelector& selector, const FidelityOptions& opts = {});

/// Samples cfg.kappa baselines from train users with cfg.seed, then selects.
SpinRecResult spinrec_explain(const Recommender& model, const InteractionDataset& ds, const UserVector& x,
                              ItemId y, const SpinRecConfig& cfg, const FidelitySelector& selector,
                              const FidelityOptions& opts = {});

/// Cosine similarity of each history item's embedding to the target's.
ExplanationMap explain_cosine(const Recommender& model, const UserVector& x, ItemId y);

/// x * grad f_y(x).
ExplanationMap explain_grad_input(const Recommender& model, const UserVector& x, ItemId y);

/// Uniform random scores on history items.
ExplanationMap explain_random(const UserVector& x, ItemId y, std::uint64_t seed);

}  // namespace spinrec
