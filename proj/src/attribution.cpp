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

#include "spinrec/attribution.hpp"

#include <cmath>
#include <sstream>

#include "spinrec/random.hpp"

namespace spinrec {

std::string_view to_string(IntegrationRule rule) {
  switch (rule) {
    case IntegrationRule::kMidpoint:
      return "midpoint";
    case IntegrationRule::kLeft:
      return "left";
    case IntegrationRule::kRight:
      return "right";
  }
  return "?";
}

IntegrationRule parse_integration_rule(std::string_view name) {
  if (name == "midpoint") return IntegrationRule::kMidpoint;
  if (name == "left" || name == "left-endpoint") return IntegrationRule::kLeft;
  if (name == "right" || name == "right-endpoint") return IntegrationRule::kRight;
  throw AttributionError("unknown integration rule '" + std::string(name) + "'");
}

namespace {

double node(IntegrationRule rule, std::size_t j, std::size_t steps) {
  const auto J = static_cast<double>(steps);
  switch (rule) {
    case IntegrationRule::kMidpoint:
      return (static_cast<double>(j) + 0.5) / J;
    case IntegrationRule::kLeft:
      return static_cast<double>(j) / J;
    case IntegrationRule::kRight:
      return static_cast<double>(j + 1) / J;
  }
  return 0.0;
}

}  // namespace

ExplanationMap path_integrate(const Recommender& model, const VecRef& x, ItemId y, const PathSpec& path) {
  if (path.steps < 1) throw AttributionError("path integration needs at least one step");
  if (path.baseline.size() != x.size()) throw AttributionError("baseline and input dimensions differ");
  if (static_cast<std::size_t>(x.size()) != model.num_items()) throw AttributionError("input dimension mismatch");
  if (y >= model.num_items()) throw AttributionError("target item out of range");

  const Vec delta = x - path.baseline;
  Vec sum = Vec::Zero(x.size());
  if (delta.isZero(0.0)) return {y, sum, false};
  Vec point(x.size());
  for (std::size_t j = 0; j < path.steps; ++j) {
    const double t = node(path.rule, j, path.steps);
    point = path.baseline + t * delta;
    const Vec g = model.grad_input(point, y);
    if (!g.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite gradient at t=" << t << " (step " << j + 1 << " of " << path.steps << ")";
      throw AttributionError(msg.str());
    }
    sum += g;
  }
  return {y, delta.cwiseProduct(sum) / static_cast<double>(path.steps), false};
}

ExplanationMap path_integrate(const Recommender& model, const UserVector& x, ItemId y, const PathSpec& path) {
  return path_integrate(model, x.dense(), y, path);
}

ExplanationMap mean_map(std::span<const ExplanationMap> maps) {
  if (maps.empty()) throw AttributionError("mean of zero maps");
  ExplanationMap out{maps.front().target, Vec::Zero(maps.front().scores.size()), true};
  for (const auto& m : maps) {
    if (m.target != out.target) throw AttributionError("cannot average maps for different targets");
    if (m.scores.size() != out.scores.size()) throw AttributionError("cannot average maps of different dimension");
    out.scores += m.scores;
    out.restricted_support = out.restricted_support && m.restricted_support;
  }
  out.scores /= static_cast<double>(maps.size());
  return out;
}

void SpinRecConfig::validate() const {
  if (kappa < 1) throw AttributionError("kappa must be >= 1");
  if (steps < 1) throw AttributionError("integration steps must be >= 1");
}

SpinRecResult spinrec_explain(const Recommender& model, const UserVector& x, ItemId y,
                              std::span<const UserVector> baselines, const SpinRecConfig& cfg,
                              const MapScorer& scorer) {
  cfg.validate();
  if (baselines.empty()) throw AttributionError("SPINRec needs at least one baseline");
  const Vec dense_x = x.dense();
  std::vector<ExplanationMap> candidates;
  candidates.reserve(baselines.size() + 1);
  for (const auto& z : baselines) {
    candidates.push_back(path_integrate(model, dense_x, y, PathSpec::from(z, cfg.steps, cfg.rule)));
  }
  if (cfg.use_mean_map) candidates.push_back(mean_map(candidates));

  SpinRecResult result;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = scorer(candidates[i]);
    result.candidate_scores.push_back(s);
    if (i == 0 || s > result.selector_score) {
      result.selector_score = s;
      result.selected_index = i;
    }
  }
  result.map = std::move(candidates[result.selected_index]);
  return result;
}

SpinRecResult spinrec_explain(const Recommender& model, const UserVector& x, ItemId y,
                              std::span<const UserVector> baselines, const SpinRecConfig& cfg,
                              const FidelitySelector& selector, const FidelityOptions& opts) {
  return spinrec_explain(model, x, y, baselines, cfg, [&](const ExplanationMap& m) {
    return evaluate_selector(selector, model, x, y, m, opts);
  });
}

SpinRecResult spinrec_explain(const Recommender& model, const InteractionDataset& ds, const UserVector& x,
                              ItemId y, const SpinRecConfig& cfg, const FidelitySelector& selector,
                              const FidelityOptions& opts) {
  cfg.validate();
  const auto baselines = sample_baselines(ds, cfg.kappa, cfg.include_zero_baseline, cfg.seed);
  return spinrec_explain(model, x, y, baselines, cfg, selector, opts);
}

ExplanationMap explain_cosine(const Recommender& model, const UserVector& x, ItemId y) {
  if (y >= model.num_items()) throw AttributionError("target item out of range");
  const Eigen::MatrixXd emb = model.item_embeddings();
  const double target_norm = emb.row(y).norm();
  ExplanationMap out{y, Vec::Zero(static_cast<Eigen::Index>(model.num_items())), true};
  for (ItemId i : x.items()) {
    const double n = emb.row(i).norm() * target_norm;
    out.scores[i] = n > 0.0 ? emb.row(i).dot(emb.row(y)) / n : 0.0;
  }
  return out;
}

ExplanationMap explain_grad_input(const Recommender& model, const UserVector& x, ItemId y) {
  const Vec dense_x = x.dense();
  return {y, dense_x.cwiseProduct(model.grad_input(dense_x, y)), true};
}

ExplanationMap explain_random(const UserVector& x, ItemId y, std::uint64_t seed) {
  Rng rng(seed);
  ExplanationMap out{y, Vec::Zero(static_cast<Eigen::Index>(x.dimension())), true};
  for (ItemId i : x.items()) out.scores[i] = uniform01(rng);
  return out;
}

}  // namespace spinrec
