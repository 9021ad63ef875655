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

#include "spinrec/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spinrec {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPos:
      return "pos";
    case MetricKind::kDel:
      return "del";
    case MetricKind::kIns:
      return "ins";
    case MetricKind::kCdcg:
      return "cdcg";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "pos" || name == "POS") return MetricKind::kPos;
  if (name == "del" || name == "DEL") return MetricKind::kDel;
  if (name == "ins" || name == "INS") return MetricKind::kIns;
  if (name == "cdcg" || name == "CDCG") return MetricKind::kCdcg;
  throw FidelityError("unknown metric '" + std::string(name) + "'");
}

std::string MetricSpec::label() const {
  std::string s(to_string(kind));
  if (kind == MetricKind::kPos) s += "@" + std::to_string(k_r);
  return s;
}

std::vector<ItemId> explanation_order(const ExplanationMap& map, const UserVector& x) {
  if (static_cast<std::size_t>(map.scores.size()) != x.dimension()) {
    throw FidelityError("explanation map dimension does not match the user vector");
  }
  std::vector<ItemId> order(x.items().begin(), x.items().end());
  std::stable_sort(order.begin(), order.end(),
                   [&](ItemId a, ItemId b) { return map.scores[a] > map.scores[b]; });
  return order;
}

ExplanationMask top_k_mask(const ExplanationMap& map, const UserVector& x, std::size_t k_e) {
  if (x.empty()) throw FidelityError("cannot select explanatory items from an empty history");
  auto order = explanation_order(map, x);
  order.resize(std::min(k_e, order.size()));
  std::sort(order.begin(), order.end());
  return {std::move(order), k_e};
}

UserVector perturb(const UserVector& x, const ExplanationMask& mask, PerturbMode mode) {
  for (ItemId i : mask.selected) {
    if (!x.contains(i)) throw FidelityError("mask item " + std::to_string(i) + " is not in the history");
  }
  if (mode == PerturbMode::kRetain) return UserVector(mask.selected, x.dimension());
  std::vector<ItemId> rest;
  std::set_difference(x.items().begin(), x.items().end(), mask.selected.begin(), mask.selected.end(),
                      std::back_inserter(rest));
  return UserVector(std::move(rest), x.dimension());
}

namespace {

std::size_t rank_with_exclusion(const Vec& scores, ItemId y, const UserVector& original,
                                const UserVector& perturbed, RankExclusion exclusion) {
  switch (exclusion) {
    case RankExclusion::kPerturbedHistory:
      return rank_in_scores(scores, y, &perturbed);
    case RankExclusion::kOriginalHistory:
      return rank_in_scores(scores, y, &original);
    case RankExclusion::kNone:
      return rank_in_scores(scores, y, nullptr);
  }
  return rank_in_scores(scores, y, nullptr);
}

double cdcg_from_rank(std::size_t rank) { return 1.0 / std::log2(1.0 + static_cast<double>(rank)); }

double checked_ratio(double num, double den) {
  if (!(den > 0.0)) throw FidelityError("target score is not positive; score ratio is undefined");
  return num / den;
}

/// Builds the perturbed vector for a prefix of an explanation order.
UserVector prefix_perturb(const UserVector& x, const std::vector<ItemId>& order, std::size_t k, PerturbMode mode) {
  ExplanationMask mask{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, order.size()))}, k};
  std::sort(mask.selected.begin(), mask.selected.end());
  return perturb(x, mask, mode);
}

double metric_from_prefix(const Recommender& model, const UserVector& x, ItemId y, const std::vector<ItemId>& order,
                          const MetricSpec& metric, std::size_t k, double original, const FidelityOptions& opts) {
  switch (metric.kind) {
    case MetricKind::kDel:
      return checked_ratio(model.score(prefix_perturb(x, order, k, PerturbMode::kRemove).dense(), y), original);
    case MetricKind::kIns:
      return checked_ratio(model.score(prefix_perturb(x, order, k, PerturbMode::kRetain).dense(), y), original);
    case MetricKind::kPos:
    case MetricKind::kCdcg: {
      const UserVector removed = prefix_perturb(x, order, k, PerturbMode::kRemove);
      const std::size_t rank = rank_with_exclusion(model.score_all(removed.dense()), y, x, removed, opts.exclusion);
      return metric.kind == MetricKind::kPos ? (rank <= metric.k_r ? 1.0 : 0.0) : cdcg_from_rank(rank);
    }
  }
  throw FidelityError("unknown metric");
}

void check_target(const Recommender& model, const UserVector& x, ItemId y) {
  if (y >= model.num_items()) throw FidelityError("target item out of range");
  if (x.dimension() != model.num_items()) throw FidelityError("user vector dimension mismatch");
}

}  // namespace

double metric_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
                 const MetricSpec& metric, std::size_t k_e, const FidelityOptions& opts) {
  check_target(model, x, y);
  if (x.empty()) throw FidelityError("cannot evaluate an explanation for an empty history");
  const auto order = explanation_order(map, x);
  const double original = metric.needs_rank() ? 0.0 : model.score(x.dense(), y);
  return metric_from_prefix(model, x, y, order, metric, k_e, original, opts);
}

int pos_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map, std::size_t k_r,
           std::size_t k_e, const FidelityOptions& opts) {
  return static_cast<int>(metric_at(model, x, y, map, {MetricKind::kPos, k_r}, k_e, opts));
}

double del_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
              std::size_t k_e, const FidelityOptions& opts) {
  return metric_at(model, x, y, map, {MetricKind::kDel, 0}, k_e, opts);
}

double ins_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
              std::size_t k_e, const FidelityOptions& opts) {
  return metric_at(model, x, y, map, {MetricKind::kIns, 0}, k_e, opts);
}

double cdcg_at(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
               std::size_t k_e, const FidelityOptions& opts) {
  return metric_at(model, x, y, map, {MetricKind::kCdcg, 0}, k_e, opts);
}

std::vector<std::size_t> auc_steps(std::size_t history, std::size_t stride, std::optional<std::size_t> budget) {
  if (stride < 1) throw FidelityError("AUC stride must be >= 1");
  std::vector<std::size_t> steps;
  for (std::size_t k = stride; k <= history; k += stride) {
    if (budget && steps.size() >= *budget) break;
    steps.push_back(k);
  }
  return steps;
}

double auc_curve(const Recommender& model, const UserVector& x, ItemId y, const ExplanationMap& map,
                 const MetricSpec& metric, const FidelityOptions& opts, std::optional<std::size_t> budget) {
  check_target(model, x, y);
  if (x.empty()) throw FidelityError("AUC needs a non-empty history");
  const auto order = explanation_order(map, x);
  const auto steps = auc_steps(x.size(), opts.stride, budget);
  if (steps.empty()) throw FidelityError("AUC step grid is empty");
  const double original = metric.needs_rank() ? 0.0 : model.score(x.dense(), y);
  double sum = 0.0;
  for (std::size_t k : steps) sum += metric_from_prefix(model, x, y, order, metric, k, original, opts);
  return sum / static_cast<double>(steps.size());
}

PerturbationCurves perturbation_curves(const Recommender& model, const UserVector& x, ItemId y,
                                       const ExplanationMap& map, const FidelityOptions& opts, bool with_ranks,
                                       const std::vector<std::size_t>& extra_steps) {
  check_target(model, x, y);
  if (x.empty()) throw FidelityError("perturbation curves need a non-empty history");
  const auto order = explanation_order(map, x);
  const auto grid = auc_steps(x.size(), opts.stride);
  std::vector<std::size_t> steps = grid;
  for (std::size_t k : extra_steps) {
    if (k >= 1) steps.push_back(std::min(k, x.size()));
  }
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

  PerturbationCurves c;
  c.original_score = model.score(x.dense(), y);
  c.history = x.size();
  c.steps = steps;
  for (std::size_t k : steps) {
    c.in_auc.push_back(std::binary_search(grid.begin(), grid.end(), k));
    const UserVector removed = prefix_perturb(x, order, k, PerturbMode::kRemove);
    const Vec removed_dense = removed.dense();
    // Ratios always use score(); score_all()[y] may differ in the last bit.
    c.removal_score.push_back(model.score(removed_dense, y));
    if (with_ranks) {
      c.removal_rank.push_back(rank_with_exclusion(model.score_all(removed_dense), y, x, removed, opts.exclusion));
    }
    c.insertion_score.push_back(model.score(prefix_perturb(x, order, k, PerturbMode::kRetain).dense(), y));
  }
  return c;
}

double PerturbationCurves::value_by_index(const MetricSpec& metric, std::size_t i) const {
  switch (metric.kind) {
    case MetricKind::kDel:
      return checked_ratio(removal_score.at(i), original_score);
    case MetricKind::kIns:
      return checked_ratio(insertion_score.at(i), original_score);
    case MetricKind::kPos:
      if (removal_rank.empty()) throw FidelityError("curves were computed without ranks");
      return removal_rank.at(i) <= metric.k_r ? 1.0 : 0.0;
    case MetricKind::kCdcg:
      if (removal_rank.empty()) throw FidelityError("curves were computed without ranks");
      return cdcg_from_rank(removal_rank.at(i));
  }
  throw FidelityError("unknown metric");
}

double PerturbationCurves::value_at(const MetricSpec& metric, std::size_t k) const {
  if (steps.empty()) throw FidelityError("empty perturbation curves");
  k = std::min(k, history);
  const auto it = std::lower_bound(steps.begin(), steps.end(), k);
  if (it == steps.end() || *it != k) throw FidelityError("step " + std::to_string(k) + " was not evaluated");
  return value_by_index(metric, static_cast<std::size_t>(it - steps.begin()));
}

double PerturbationCurves::auc(const MetricSpec& metric) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!in_auc[i]) continue;
    sum += value_by_index(metric, i);
    ++n;
  }
  if (n == 0) throw FidelityError("AUC step grid is empty");
  return sum / static_cast<double>(n);
}

FidelitySelector FidelitySelector::deletion(std::optional<std::size_t> step_budget) {
  return for_metric({MetricKind::kDel, 0}, step_budget);
}

FidelitySelector FidelitySelector::for_metric(const MetricSpec& metric, std::optional<std::size_t> step_budget) {
  if (step_budget && *step_budget < 1) throw FidelityError("selector step budget must be >= 1");
  return {metric, !metric.lower_is_better(), step_budget};
}

double evaluate_selector(const FidelitySelector& sel, const Recommender& model, const UserVector& x, ItemId y,
                         const ExplanationMap& map, const FidelityOptions& opts) {
  const double v = auc_curve(model, x, y, map, sel.metric, opts, sel.step_budget);
  return sel.maximize ? v : -v;
}

}  // namespace spinrec
