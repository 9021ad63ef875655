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

#include "spinrec/experiment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "spinrec/random.hpp"
#include "spinrec/stats.hpp"

#ifndef SPINREC_GIT_DESCRIBE
#define SPINREC_GIT_DESCRIBE "unknown"
#endif

namespace spinrec {

std::string build_version() { return SPINREC_GIT_DESCRIBE; }

std::uint64_t user_seed(std::uint64_t master, UserId user) {
  return derive_seed(master, 0x100000000ULL + user);
}

InteractionDataset prepare_dataset(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  InteractionDataset ds;
  switch (d.source) {
    case DatasetSource::kSynthetic:
      ds = generate_synthetic(d.synthetic);
      break;
    case DatasetSource::kML1M:
      ds = load_ml1m(d.path, d.load);
      break;
    case DatasetSource::kTSV:
      ds = load_tsv(d.path);
      break;
    case DatasetSource::kSnapshot:
      // Snapshots keep the split they were saved with.
      return load_snapshot(d.path);
  }
  const std::uint64_t seed = d.split_seed ? *d.split_seed : derive_seed(cfg.seed, 0x5b1);
  return split_users(ds, d.test_fraction, d.validation_fraction, seed);
}

TrainedModel prepare_model(const ExperimentConfig& cfg, const InteractionDataset& ds) {
  if (!cfg.model.checkpoint.empty()) {
    std::shared_ptr<const ParametricModel> model = load_checkpoint(cfg.model.checkpoint);
    if (model->num_items() != ds.num_items()) {
      throw ExperimentError("checkpoint item count does not match the dataset");
    }
    TrainReport report;
    report.validation_recall_at_10 = holdout_recall(*model, ds, Split::kValidation, 10, cfg.seed);
    return {std::move(model), report};
  }
  TrainConfig tc = cfg.model.train;
  if (!cfg.model.train_seed_set) tc.seed = derive_seed(cfg.seed, 0x7e);
  return train(cfg.model.kind, ds, tc);
}

std::vector<UserId> evaluable_users(const ExperimentConfig& cfg, const InteractionDataset& ds, std::size_t num_items) {
  std::vector<UserId> out;
  for (UserId u : ds.users_in(Split::kTest)) {
    const std::size_t h = ds.items_of(u).size();
    if (h < std::max<std::size_t>(1, cfg.dataset.min_history) || h >= num_items) continue;
    out.push_back(u);
    if (cfg.dataset.max_test_users > 0 && out.size() >= cfg.dataset.max_test_users) break;
  }
  return out;
}

ExplainOutput run_explainer(const ExplainerSpec& spec, const Recommender& model, const InteractionDataset& ds,
                            const UserVector& x, ItemId y, std::uint64_t seed, const FidelitySelector& selector,
                            const FidelityOptions& opts) {
  switch (spec.kind) {
    case ExplainerKind::kSpinRec: {
      const auto baselines =
          sample_baselines(ds, spec.spinrec.kappa, spec.spinrec.include_zero_baseline, derive_seed(seed, 1));
      auto result = spinrec_explain(model, x, y, baselines, spec.spinrec, selector, opts);
      ExplanationMap map = result.map;
      return {std::move(map), std::move(result)};
    }
    case ExplainerKind::kPathIntegration: {
      const PathSpec path{Vec::Zero(static_cast<Eigen::Index>(x.dimension())), spec.spinrec.steps, spec.spinrec.rule};
      return {path_integrate(model, x, y, path), std::nullopt};
    }
    case ExplainerKind::kCosine:
      return {explain_cosine(model, x, y), std::nullopt};
    case ExplainerKind::kGradInput:
      return {explain_grad_input(model, x, y), std::nullopt};
    case ExplainerKind::kRandom:
      return {explain_random(x, y, derive_seed(seed, 2)), std::nullopt};
  }
  throw ExperimentError("unknown explainer kind");
}

namespace {

FidelityOptions options_for(const ExperimentConfig& cfg, std::size_t history) {
  FidelityOptions opts;
  opts.exclusion = cfg.metrics.exclusion;
  const std::size_t limit = cfg.metrics.long_history;
  opts.stride = history > limit ? (history + limit - 1) / limit : 1;
  return opts;
}

struct UserResult {
  std::vector<FidelityObservation> observations;
  bool strided = false;
};

UserResult evaluate_user(const ExperimentConfig& cfg, const InteractionDataset& ds, const Recommender& model,
                         UserId u, const std::vector<MetricSpec>& metrics, bool with_ranks) {
  const UserVector x = ds.user_vector(u);
  const ItemId y = recommend_top1(model, x);
  const FidelityOptions opts = options_for(cfg, x.size());
  const std::uint64_t seed = user_seed(cfg.seed, u);
  UserResult r;
  r.strided = opts.stride > 1;
  for (const auto& spec : cfg.explainers) {
    try {
      const ExplainOutput out = run_explainer(spec, model, ds, x, y, seed, cfg.selector, opts);
      const PerturbationCurves curves =
          perturbation_curves(model, x, y, out.map, opts, with_ranks, cfg.metrics.k_e);
      for (const auto& metric : metrics) {
        for (std::size_t k : cfg.metrics.k_e) {
          r.observations.push_back({u, y, spec.name, metric, k, curves.value_at(metric, k)});
        }
        if (cfg.metrics.auc) r.observations.push_back({u, y, spec.name, metric, std::nullopt, curves.auc(metric)});
      }
    } catch (const std::exception& e) {
      throw ExperimentError("user " + std::to_string(u) + ", explainer '" + spec.name + "': " + e.what());
    }
  }
  return r;
}

std::string cell_key(const std::string& method, const MetricSpec& metric, std::optional<std::size_t> k_e) {
  return method + "|" + metric.label() + "|" + (k_e ? std::to_string(*k_e) : std::string("AUC"));
}

/// Runs fn(i) for i in [0, n) on `workers` threads. Returns the lowest failing
/// index and its message, if any; remaining work is abandoned after a failure.
template <typename Fn>
std::optional<std::pair<std::size_t, std::string>> parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::string> errors(n);
  auto body = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        failed.store(true);
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(1, workers), std::max<std::size_t>(1, n));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) return std::make_pair(i, errors[i]);
  }
  return std::nullopt;
}

std::string format_value(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

}  // namespace

const ReportCell& FidelityReport::cell(const std::string& method, const MetricSpec& metric,
                                       std::optional<std::size_t> k_e) const {
  for (const auto& c : cells) {
    if (c.method == method && c.metric == metric && c.k_e == k_e) return c;
  }
  throw ExperimentError("no report cell " + cell_key(method, metric, k_e));
}

std::vector<double> FidelityReport::values(const std::string& method, const MetricSpec& metric,
                                           std::optional<std::size_t> k_e) const {
  std::vector<double> out;
  for (const auto& o : observations) {
    if (o.method == method && o.metric == metric && o.k_e == k_e) out.push_back(o.value);
  }
  return out;
}

void write_observations_csv(const std::vector<FidelityObservation>& obs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ExperimentError("cannot write " + path.string());
  out << "user,method,metric,k_r,k_e,value\n";
  for (const auto& o : obs) {
    out << o.user << ',' << o.method << ',' << to_string(o.metric.kind) << ',';
    if (o.metric.kind == MetricKind::kPos) out << o.metric.k_r;
    out << ',' << (o.k_e ? std::to_string(*o.k_e) : std::string("AUC")) << ',' << format_value(o.value) << '\n';
  }
}

FidelityReport run_experiment(const ExperimentConfig& cfg, const InteractionDataset& ds, const Recommender& model) {
  cfg.validate();
  if (model.num_items() != ds.num_items()) throw ExperimentError("model and dataset item counts differ");
  const auto users = evaluable_users(cfg, ds, model.num_items());
  if (users.empty()) throw ExperimentError("no evaluable users");

  const auto metrics = cfg.metrics.expanded();
  bool with_ranks = false;
  for (const auto& m : metrics) with_ranks = with_ranks || m.needs_rank();

  std::vector<std::optional<UserResult>> results(users.size());
  const auto failure = parallel_for(users.size(), cfg.workers, [&](std::size_t i) {
    results[i] = evaluate_user(cfg, ds, model, users[i], metrics, with_ranks);
  });

  FidelityReport report;
  report.reference_method = cfg.reference_method;
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!results[i]) continue;
    report.users.push_back(users[i]);
    report.strided_users += results[i]->strided ? 1 : 0;
    for (auto& o : results[i]->observations) report.observations.push_back(std::move(o));
  }
  if (failure) {
    if (!cfg.output_dir.empty()) {
      std::filesystem::create_directories(cfg.output_dir);
      write_observations_csv(report.observations, cfg.output_dir / "observations.csv");
    }
    throw ExperimentError(failure->second);
  }

  std::map<std::string, std::vector<double>> by_cell;
  for (const auto& o : report.observations) by_cell[cell_key(o.method, o.metric, o.k_e)].push_back(o.value);
  const bool has_reference =
      std::any_of(cfg.explainers.begin(), cfg.explainers.end(),
                  [&](const ExplainerSpec& e) { return e.name == cfg.reference_method; });

  std::vector<std::optional<std::size_t>> k_cols(cfg.metrics.k_e.begin(), cfg.metrics.k_e.end());
  if (cfg.metrics.auc) k_cols.push_back(std::nullopt);
  for (const auto& spec : cfg.explainers) {
    for (const auto& metric : metrics) {
      for (const auto& k : k_cols) {
        const auto& v = by_cell.at(cell_key(spec.name, metric, k));
        ReportCell c{spec.name, metric, k, mean(v), sample_stddev(v), v.size(), std::nullopt};
        if (has_reference && spec.name != cfg.reference_method && v.size() >= 2) {
          c.p_value = paired_t_test(v, by_cell.at(cell_key(cfg.reference_method, metric, k)));
        }
        report.cells.push_back(c);
      }
    }
  }
  return report;
}

FidelityReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const InteractionDataset ds = prepare_dataset(cfg);
  const TrainedModel trained = prepare_model(cfg, ds);
  FidelityReport report = run_experiment(cfg, ds, *trained.model);
  report.validation_recall_at_10 = trained.report.validation_recall_at_10;
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_observations_csv(report.observations, cfg.output_dir / "observations.csv");
    std::ofstream(cfg.output_dir / "report.json") << report_to_json(report, cfg) << '\n';
    std::ofstream(cfg.output_dir / "report.txt") << report_to_table(report);
  }
  return report;
}

std::string report_to_json(const FidelityReport& report, const ExperimentConfig& cfg) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = build_version();
  j["config"] = ordered_json::parse(config_to_json(cfg));
  j["evaluated_users"] = report.users.size();
  j["strided_users"] = report.strided_users;
  j["reference_method"] = report.reference_method;
  j["validation_recall_at_10"] =
      std::isfinite(report.validation_recall_at_10) ? ordered_json(report.validation_recall_at_10) : ordered_json(nullptr);
  j["cells"] = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json cell;
    cell["method"] = c.method;
    cell["metric"] = to_string(c.metric.kind);
    cell["k_r"] = c.metric.kind == MetricKind::kPos ? ordered_json(c.metric.k_r) : ordered_json(nullptr);
    cell["k_e"] = c.k_e ? ordered_json(*c.k_e) : ordered_json("AUC");
    cell["mean"] = c.mean;
    cell["std"] = c.stddev;
    cell["users"] = c.users;
    cell["p_value"] = c.p_value ? ordered_json(*c.p_value) : ordered_json(nullptr);
    j["cells"].push_back(cell);
  }
  return j.dump(2);
}

std::string report_to_table(const FidelityReport& report) {
  std::vector<std::string> methods;
  std::vector<MetricSpec> metrics;
  std::vector<std::optional<std::size_t>> ks;
  for (const auto& c : report.cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
    if (std::find(metrics.begin(), metrics.end(), c.metric) == metrics.end()) metrics.push_back(c.metric);
    if (std::find(ks.begin(), ks.end(), c.k_e) == ks.end()) ks.push_back(c.k_e);
  }
  // AUC block first, then one block per explanation length.
  std::stable_partition(ks.begin(), ks.end(), [](const auto& k) { return !k.has_value(); });
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  for (const auto& k : ks) {
    out << (k ? "K_e = " + std::to_string(*k) : std::string("AUC")) << "  (" << report.users.size() << " users)\n";
    out << std::left << std::setw(14) << "Method";
    for (const auto& m : metrics) {
      std::string label = m.label();
      for (auto& ch : label) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      out << std::right << std::setw(10) << label;
    }
    out << '\n';
    for (const auto& method : methods) {
      out << std::left << std::setw(14) << method;
      for (const auto& m : metrics) out << std::right << std::setw(10) << report.cell(method, m, k).mean;
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

KappaSweep kappa_sweep(const ExperimentConfig& cfg, const InteractionDataset& ds, const Recommender& model,
                       const std::vector<std::size_t>& kappas) {
  if (kappas.empty()) throw ExperimentError("kappa sweep needs at least one kappa");
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    if (kappas[i] < 1) throw ExperimentError("kappa values must be >= 1");
    if (i > 0 && kappas[i] <= kappas[i - 1]) throw ExperimentError("kappa values must be strictly ascending");
  }
  SpinRecConfig sc;
  for (const auto& e : cfg.explainers) {
    if (e.kind == ExplainerKind::kSpinRec) {
      sc = e.spinrec;
      break;
    }
  }
  KappaSweep sweep;
  sweep.kappas = kappas;
  sweep.users = evaluable_users(cfg, ds, model.num_items());
  if (sweep.users.empty()) throw ExperimentError("no evaluable users");
  sweep.per_user.assign(sweep.users.size(), {});
  const std::size_t kmax = kappas.back();

  const auto failure = parallel_for(sweep.users.size(), cfg.workers, [&](std::size_t i) {
    const UserId u = sweep.users[i];
    const UserVector x = ds.user_vector(u);
    const ItemId y = recommend_top1(model, x);
    const FidelityOptions opts = options_for(cfg, x.size());
    // Same stream as run_explainer, so the sweep point at kappa equals a SPINRec run at kappa.
    const auto baselines = sample_baselines(ds, kmax, false, derive_seed(user_seed(cfg.seed, u), 1));
    const Vec dense_x = x.dense();
    auto score_of = [&](const Vec& z) {
      const auto map = path_integrate(model, dense_x, y, PathSpec{z, sc.steps, sc.rule});
      return evaluate_selector(cfg.selector, model, x, y, map, opts);
    };
    std::vector<double> scores;
    scores.reserve(kmax);
    for (const auto& z : baselines) scores.push_back(score_of(z.dense()));
    std::optional<double> zero;
    if (sc.include_zero_baseline) zero = score_of(Vec::Zero(dense_x.size()));
    std::vector<double> row;
    for (std::size_t k : kappas) {
      double best = *std::max_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k));
      if (zero) best = std::max(best, *zero);
      row.push_back(best);
    }
    sweep.per_user[i] = std::move(row);
  });
  if (failure) throw ExperimentError(failure->second);

  for (std::size_t k = 0; k < kappas.size(); ++k) {
    double sum = 0.0;
    for (const auto& row : sweep.per_user) sum += row[k];
    sweep.mean_fidelity.push_back(sum / static_cast<double>(sweep.per_user.size()));
  }
  return sweep;
}

KappaSweep kappa_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& kappas) {
  const InteractionDataset ds = prepare_dataset(cfg);
  const TrainedModel trained = prepare_model(cfg, ds);
  return kappa_sweep(cfg, ds, *trained.model, kappas);
}

CostEstimate estimate_cost(const ExperimentConfig& cfg, std::size_t parameter_count, std::size_t num_items) {
  SpinRecConfig sc;
  for (const auto& e : cfg.explainers) {
    if (e.kind == ExplainerKind::kSpinRec) {
      sc = e.spinrec;
      break;
    }
  }
  CostEstimate c;
  c.kappa = sc.kappa;
  c.steps = sc.steps;
  // Without a budget the selector walks at most long_history steps per map.
  c.evaluations = cfg.selector.step_budget.value_or(cfg.metrics.long_history);
  c.parameters = parameter_count;
  c.items = num_items;
  if (c.kappa == 0 || c.steps == 0 || c.evaluations == 0 || c.parameters == 0 || c.items == 0) {
    throw ExperimentError("cost estimate inputs must be positive");
  }
  c.predicted = static_cast<double>(c.kappa) * static_cast<double>(c.parameters) *
                (static_cast<double>(c.steps) + static_cast<double>(c.evaluations) * static_cast<double>(c.items));
  return c;
}

}  // namespace spinrec
