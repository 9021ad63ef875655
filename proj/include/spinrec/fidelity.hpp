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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinrec/explanation.hpp"

namespace spinrec {

class FidelityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The top-K_e history items of an explanation map.
struct ExplanationMask {
  std::vector<ItemId> selected;  // sorted ascending
  std::size_t k_e = 0;
};

/// History items ordered by descending map score, ties to the lower index.
std::vector<ItemId> explanation_order(const ExplanationMap& map, const UserVector& x);

/// The min(k_e, |history|) best history items. k_e = 0 gives an empty mask.
ExplanationMask top_k_mask(const ExplanationMap& map, const UserVector& x, std::size_t k_e);

enum class PerturbMode { kRetain, kRemove };

/// kRetain keeps exactly the masked items, kRemove drops them from the history.
UserVector perturb(const UserVector& x, const ExplanationMask& mask, PerturbMode mode);

/// History excluded from the candidate pool when ranking after a perturbation.
enum class RankExclusion {
  kPerturbedHistory,  // removed items re-enter the pool
  kOriginalHistory,
  kNone,
};

struct FidelityOptions {
  RankExclusion exclusion = RankExclusion::kPerturbedHistory;
  // AUC evaluates after s, 2s, ... items; 1 walks the whole history item by item.
  std::size_t stride = 1;
};

enum class MetricKind { kPos, kDel, kIns, kCdcg };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view name);

/// A metric and its ranking cutoff (only POS uses k_r).
struct MetricSpec {
  MetricKind kind = MetricKind::kDel;
  std::size_t k_r = 0;

  /// True for metrics where a lower value means a more faithful explanation.
  bool lower_is_better() const { return kind != MetricKind::kIns; }
  bool needs_rank() const { return kind == MetricKind::kPos || kind == MetricKind::kCdcg; }
  std::string label() const;
  bool operator==(const MetricSpec&) const = default;
};

/// 1 when y still ranks within the top k_r after removing the top-k_e items.
int pos_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map, std::size_t k_r,
           std::size_t k_e, const FidelityOptions& opts = {});

/// f(x without top-k_e)_y / f(x)_y.
double del_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
              std::size_t k_e, const FidelityOptions& opts = {});

/// f(only top-k_e)_y / f(x)_y.
double ins_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
              std::size_t k_e, const FidelityOptions& opts = {});

/// 1 / log2(1 + rank) after removing the top-k_e items.
double cdcg_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
               std::size_t k_e, const FidelityOptions& opts = {});

double metric_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
                 const MetricSpec& metric, std::size_t k_e, const FidelityOptions& opts = {});

/// Step counts used by AUC: stride, 2*stride, ... up to |history|, optionally
/// truncated to the first `budget` steps.
std::vector<std::size_t> auc_steps(std::size_t history, std::size_t stride,
                                   std::optional<std::size_t> budget = std::nullopt);

/// Mean of the metric over progressive removal (POS, DEL, CDCG) or
/// progressive retention (INS) of the explanation-ordered history.
double auc_curve(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
                 const MetricSpec& metric, const FidelityOptions& opts = {},
                 std::optional<std::size_t> budget = std::nullopt);

/// Per-step target scores and ranks for one explanation; every fixed-length
/// metric and AUC can be read off these without rescoring.
struct PerturbationCurves {
  double original_score = 0.0;
  std::size_t history = 0;
  std::vector<std::size_t> steps;
  std::vector<double> removal_score;      // f(x without top-k)_y, k = steps[i]
  std::vector<std::size_t> removal_rank;  // empty unless ranks were requested
  std::vector<double> insertion_score;    // f(only top-k)_y
  std::vector<bool> in_auc;               // step belongs to the AUC grid

  /// Metric after k items (k is clamped to the history length).
  double value_at(const MetricSpec& metric, std::size_t k) const;
  double auc(const MetricSpec& metric) const;

 private:
  double value_by_index(const MetricSpec& metric, std::size_t index) const;
};

/// Evaluates removal/insertion at every AUC step plus any extra k values in
/// `extra_steps` (merged and deduplicated). Ranks are computed only when
/// with_ranks is set.
PerturbationCurves perturbation_curves(const Recommender& model, const UserVector& x, ItemId y,
                                       const ExplanationMap& map, const FidelityOptions& opts, bool with_ranks,
                                       const std::vector<std::size_t>& extra_steps = {});

/// A metric folded into a maximisation objective for choosing between maps.
struct FidelitySelector {
  MetricSpec metric{MetricKind::kDel, 0};
  bool maximize = false;  // false: negate so larger is better
  // Truncates the AUC grid to its first N steps; unset walks the whole grid.
  std::optional<std::size_t> step_budget;

  /// Negative DEL-AUC, over the full removal grid unless a budget is given.
  static FidelitySelector deletion(std::optional<std::size_t> step_budget = std::nullopt);
  static FidelitySelector for_metric(const MetricSpec& metric, std::optional<std::size_t> step_budget = std::nullopt);
};

double evaluate_selector(const FidelitySelector& sel, const Recommender& model, const UserVector& x, ItemId y,
                         const ExplanationMap& map, const FidelityOptions& opts = {});

}  // namespace spinrec
