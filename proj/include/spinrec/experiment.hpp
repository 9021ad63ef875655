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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spinrec/attribution.hpp"
#include "spinrec/dataset.hpp"
#include "spinrec/fidelity.hpp"
#include "spinrec/training.hpp"

namespace spinrec {

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetSource { kSynthetic, kML1M, kTSV, kSnapshot };

struct DatasetSpec {
  DatasetSource source = DatasetSource::kSynthetic;
  std::filesystem::path path;
  LoadOptions load;
  SynthConfig synthetic;
  double test_fraction = 0.2;
  double validation_fraction = 0.1;
  std::optional<std::uint64_t> split_seed;  // derived from the master seed when unset
  // Users with fewer items are not explained.
  std::size_t min_history = 2;
  // 0 evaluates every eligible test user; otherwise the first N by user index.
  std::size_t max_test_users = 0;
};

struct ModelSpec {
  ModelKind kind = ModelKind::kNCF;
  TrainConfig train;
  bool train_seed_set = false;
  std::filesystem::path checkpoint;  // load instead of training when set
};

enum class ExplainerKind { kSpinRec, kPathIntegration, kCosine, kGradInput, kRandom };

std::string_view to_string(ExplainerKind kind);
ExplainerKind parse_explainer_kind(std::string_view name);

struct ExplainerSpec {
  std::string name;
  ExplainerKind kind = ExplainerKind::kSpinRec;
  // Path-based explainers read steps and rule; SPINRec reads everything.
  SpinRecConfig spinrec;
};

struct MetricGrid {
  std::vector<MetricKind> kinds = {MetricKind::kPos, MetricKind::kDel, MetricKind::kIns, MetricKind::kCdcg};
  std::vector<std::size_t> k_r = {5, 10, 20};
  std::vector<std::size_t> k_e = {2, 3, 4};
  bool auc = true;
  RankExclusion exclusion = RankExclusion::kPerturbedHistory;
  // Histories longer than this are walked with stride ceil(|history| / limit).
  std::size_t long_history = 100;

  /// Expanded metric list: one POS entry per k_r, then the others.
  std::vector<MetricSpec> expanded() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  std::vector<ExplainerSpec> explainers;
  MetricGrid metrics;
  FidelitySelector selector = FidelitySelector::deletion();
  std::string reference_method = "pi";
  std::vector<std::size_t> sweep_kappas = {1, 2, 5, 10, 20};
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  std::filesystem::path output_dir;

  void validate() const;
  /// Config with every explainer and the default metric grid on small synthetic data.
  static ExperimentConfig defaults();
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& yaml_text);
/// JSON echo of every field, used in reports and manifests.
std::string config_to_json(const ExperimentConfig& cfg);

struct FidelityObservation {
  UserId user = 0;
  ItemId target = 0;
  std::string method;
  MetricSpec metric;
  std::optional<std::size_t> k_e;  // empty for AUC rows
  double value = 0.0;
};

struct ReportCell {
  std::string method;
  MetricSpec metric;
  std::optional<std::size_t> k_e;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t users = 0;
  std::optional<double> p_value;  // paired t-test against the reference method
};

struct FidelityReport {
  std::vector<ReportCell> cells;
  std::vector<FidelityObservation> observations;  // ordered by user, method, metric
  std::vector<UserId> users;
  std::size_t strided_users = 0;
  std::string reference_method;
  double validation_recall_at_10 = 0.0;

  const ReportCell& cell(const std::string& method, const MetricSpec& metric, std::optional<std::size_t> k_e) const;
  /// Per-user values for one cell, in report user order.
  std::vector<double> values(const std::string& method, const MetricSpec& metric,
                             std::optional<std::size_t> k_e) const;
};

/// Loaded and split dataset for a config.
InteractionDataset prepare_dataset(const ExperimentConfig& cfg);
/// Trains, or loads cfg.model.checkpoint when set.
TrainedModel prepare_model(const ExperimentConfig& cfg, const InteractionDataset& ds);
/// Test users with enough history to explain, in index order.
std::vector<UserId> evaluable_users(const ExperimentConfig& cfg, const InteractionDataset& ds,
                                    std::size_t num_items);

/// Produces one explainer's map for user u; the per-user seed feeds SPINRec
/// baseline sampling and the random explainer.
struct ExplainOutput {
  ExplanationMap map;
  std::optional<SpinRecResult> spinrec;
};
ExplainOutput run_explainer(const ExplainerSpec& spec, const Recommender& model, const InteractionDataset& ds,
                            const UserVector& x, ItemId y, std::uint64_t user_seed,
                            const FidelitySelector& selector, const FidelityOptions& opts);

std::uint64_t user_seed(std::uint64_t master, UserId user);

/// Full protocol: data, model, explanations for every evaluable test user,
/// metrics, aggregation. Writes observations.csv, report.json and
/// report.txt into cfg.output_dir when it is non-empty.
FidelityReport run_experiment(const ExperimentConfig& cfg);
FidelityReport run_experiment(const ExperimentConfig& cfg, const InteractionDataset& ds, const Recommender& model);

std::string report_to_json(const FidelityReport& report, const ExperimentConfig& cfg);
std::string report_to_table(const FidelityReport& report);
void write_observations_csv(const std::vector<FidelityObservation>& obs, const std::filesystem::path& path);

struct KappaSweep {
  std::vector<std::size_t> kappas;
  std::vector<double> mean_fidelity;             // per kappa
  std::vector<UserId> users;
  std::vector<std::vector<double>> per_user;     // [user][kappa index]
};

/// Nested sweep: each user's baselines are drawn once for max(kappas) and
/// every kappa uses a prefix (plus the zero baseline when configured), so
/// per-user selector fidelity never decreases with kappa.
KappaSweep kappa_sweep(const ExperimentConfig& cfg, const InteractionDataset& ds, const Recommender& model,
                       const std::vector<std::size_t>& kappas);
KappaSweep kappa_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& kappas);

struct CostEstimate {
  std::size_t kappa = 0;
  std::size_t steps = 0;        // J
  std::size_t evaluations = 0;  // N
  std::size_t parameters = 0;   // Q
  std::size_t items = 0;
  double predicted = 0.0;       // kappa * Q * (J + N * items)
};

/// Cost model kappa*Q*(J + N*|items|) for the first SPINRec explainer.
CostEstimate estimate_cost(const ExperimentConfig& cfg, std::size_t parameter_count, std::size_t num_items);

std::string build_version();

}  // namespace spinrec
