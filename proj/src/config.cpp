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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "spinrec/experiment.hpp"
#include "spinrec/random.hpp"

namespace spinrec {

std::string_view to_string(ExplainerKind kind) {
  switch (kind) {
    case ExplainerKind::kSpinRec:
      return "spinrec";
    case ExplainerKind::kPathIntegration:
      return "path_integration";
    case ExplainerKind::kCosine:
      return "cosine";
    case ExplainerKind::kGradInput:
      return "grad_input";
    case ExplainerKind::kRandom:
      return "random";
  }
  return "?";
}

ExplainerKind parse_explainer_kind(std::string_view name) {
  if (name == "spinrec") return ExplainerKind::kSpinRec;
  if (name == "path_integration" || name == "pi") return ExplainerKind::kPathIntegration;
  if (name == "cosine") return ExplainerKind::kCosine;
  if (name == "grad_input") return ExplainerKind::kGradInput;
  if (name == "random") return ExplainerKind::kRandom;
  throw ExperimentError("unknown explainer kind '" + std::string(name) + "'");
}

namespace {

std::string_view to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::kSynthetic:
      return "synthetic";
    case DatasetSource::kML1M:
      return "ml1m";
    case DatasetSource::kTSV:
      return "tsv";
    case DatasetSource::kSnapshot:
      return "snapshot";
  }
  return "?";
}

DatasetSource parse_source(const std::string& s) {
  if (s == "synthetic") return DatasetSource::kSynthetic;
  if (s == "ml1m") return DatasetSource::kML1M;
  if (s == "tsv") return DatasetSource::kTSV;
  if (s == "snapshot") return DatasetSource::kSnapshot;
  throw ExperimentError("unknown dataset source '" + s + "'");
}

std::string_view to_string(RankExclusion e) {
  switch (e) {
    case RankExclusion::kPerturbedHistory:
      return "perturbed_history";
    case RankExclusion::kOriginalHistory:
      return "original_history";
    case RankExclusion::kNone:
      return "none";
  }
  return "?";
}

RankExclusion parse_exclusion(const std::string& s) {
  if (s == "perturbed_history") return RankExclusion::kPerturbedHistory;
  if (s == "original_history") return RankExclusion::kOriginalHistory;
  if (s == "none") return RankExclusion::kNone;
  throw ExperimentError("unknown rank_exclusion '" + s + "'");
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ExperimentError("config section '" + where + "' must be a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ExperimentError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (node && node[key]) {
    try {
      out = node[key].as<T>();
    } catch (const YAML::Exception& e) {
      throw ExperimentError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace

std::vector<MetricSpec> MetricGrid::expanded() const {
  std::vector<MetricSpec> out;
  for (MetricKind k : kinds) {
    if (k == MetricKind::kPos) {
      for (std::size_t r : k_r) out.push_back({k, r});
    } else {
      out.push_back({k, 0});
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (explainers.empty()) throw ExperimentError("config needs at least one explainer");
  if (metrics.kinds.empty()) throw ExperimentError("config needs at least one metric");
  for (auto k : metrics.k_e) {
    if (k < 1) throw ExperimentError("k_e values must be >= 1");
  }
  if (std::find(metrics.kinds.begin(), metrics.kinds.end(), MetricKind::kPos) != metrics.kinds.end() &&
      metrics.k_r.empty()) {
    throw ExperimentError("POS needs at least one k_r");
  }
  if (metrics.k_e.empty() && !metrics.auc) throw ExperimentError("no k_e values and AUC disabled");
  if (metrics.long_history < 1) throw ExperimentError("long_history must be >= 1");
  if (workers < 1) throw ExperimentError("workers must be >= 1");
  std::set<std::string> names;
  for (const auto& e : explainers) {
    if (e.name.empty()) throw ExperimentError("explainer without a name");
    if (!names.insert(e.name).second) throw ExperimentError("duplicate explainer name '" + e.name + "'");
    e.spinrec.validate();
  }
  if (selector.step_budget && *selector.step_budget < 1) throw ExperimentError("selector step budget must be >= 1");
  model.train.validate();
  if (dataset.source == DatasetSource::kSynthetic) dataset.synthetic.validate();
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  cfg.dataset.synthetic = {200, 100, 4, 0.6, 0.02, 1};
  cfg.model.train = TrainConfig::defaults_for(ModelKind::kNCF);
  ExplainerSpec spin{"spinrec", ExplainerKind::kSpinRec, {}};
  ExplainerSpec pi{"pi", ExplainerKind::kPathIntegration, {}};
  pi.spinrec.include_zero_baseline = true;
  cfg.explainers = {spin, pi, {"cosine", ExplainerKind::kCosine, {}}, {"grad_input", ExplainerKind::kGradInput, {}},
                    {"random", ExplainerKind::kRandom, {}}};
  return cfg;
}

ExperimentConfig parse_experiment_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ExperimentError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg = ExperimentConfig::defaults();
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "", {"seed", "workers", "output_dir", "dataset", "model", "explainers", "selector", "metrics",
                        "reference_method", "sweep"});
  read(root, "seed", cfg.seed);
  read(root, "workers", cfg.workers);
  std::string out_dir;
  read(root, "output_dir", out_dir);
  cfg.output_dir = out_dir;
  read(root, "reference_method", cfg.reference_method);

  if (auto d = root["dataset"]) {
    check_keys(d, "dataset", {"source", "path", "min_rating", "test_fraction", "validation_fraction", "split_seed",
                              "min_history", "max_test_users", "synthetic"});
    std::string source = "synthetic", path;
    read(d, "source", source);
    read(d, "path", path);
    cfg.dataset.source = parse_source(source);
    cfg.dataset.path = path;
    read(d, "min_rating", cfg.dataset.load.min_rating);
    read(d, "test_fraction", cfg.dataset.test_fraction);
    read(d, "validation_fraction", cfg.dataset.validation_fraction);
    if (d["split_seed"] && !d["split_seed"].IsNull()) cfg.dataset.split_seed = d["split_seed"].as<std::uint64_t>();
    read(d, "min_history", cfg.dataset.min_history);
    read(d, "max_test_users", cfg.dataset.max_test_users);
    if (auto s = d["synthetic"]) {
      check_keys(s, "dataset.synthetic", {"users", "items", "clusters", "within_cluster_prob", "noise_prob", "seed"});
      read(s, "users", cfg.dataset.synthetic.num_users);
      read(s, "items", cfg.dataset.synthetic.num_items);
      read(s, "clusters", cfg.dataset.synthetic.num_clusters);
      read(s, "within_cluster_prob", cfg.dataset.synthetic.within_cluster_prob);
      read(s, "noise_prob", cfg.dataset.synthetic.noise_prob);
      read(s, "seed", cfg.dataset.synthetic.seed);
    }
  }

  if (auto m = root["model"]) {
    check_keys(m, "model", {"kind", "checkpoint", "train"});
    std::string kind = "mf", ckpt;
    read(m, "kind", kind);
    cfg.model.kind = parse_model_kind(kind);
    cfg.model.train = TrainConfig::defaults_for(cfg.model.kind);
    read(m, "checkpoint", ckpt);
    cfg.model.checkpoint = ckpt;
    if (auto t = m["train"]) {
      check_keys(t, "model.train", {"dim", "hidden", "latent", "learning_rate", "epochs", "negatives", "batch_size",
                                    "seed", "weight_decay", "input_dropout", "kl_beta", "kl_anneal_steps",
                                    "max_targets_per_user"});
      auto& tc = cfg.model.train;
      read(t, "dim", tc.dim);
      read(t, "hidden", tc.hidden);
      read(t, "latent", tc.latent);
      read(t, "learning_rate", tc.learning_rate);
      read(t, "epochs", tc.epochs);
      read(t, "negatives", tc.negatives);
      read(t, "batch_size", tc.batch_size);
      if (t["seed"]) {
        tc.seed = t["seed"].as<std::uint64_t>();
        cfg.model.train_seed_set = true;
      }
      read(t, "weight_decay", tc.weight_decay);
      read(t, "input_dropout", tc.input_dropout);
      read(t, "kl_beta", tc.kl_beta);
      read(t, "kl_anneal_steps", tc.kl_anneal_steps);
      read(t, "max_targets_per_user", tc.max_targets_per_user);
    }
  }

  if (auto list = root["explainers"]) {
    if (!list.IsSequence()) throw ExperimentError("'explainers' must be a list");
    cfg.explainers.clear();
    for (const auto& e : list) {
      check_keys(e, "explainers[]", {"name", "kind", "kappa", "steps", "rule", "include_zero_baseline",
                                     "use_mean_map"});
      ExplainerSpec spec;
      std::string kind, rule = "midpoint";
      read(e, "kind", kind);
      spec.kind = parse_explainer_kind(kind.empty() ? e["name"].as<std::string>("") : kind);
      spec.name = std::string(to_string(spec.kind));
      read(e, "name", spec.name);
      read(e, "kappa", spec.spinrec.kappa);
      read(e, "steps", spec.spinrec.steps);
      read(e, "rule", rule);
      spec.spinrec.rule = parse_integration_rule(rule);
      read(e, "include_zero_baseline", spec.spinrec.include_zero_baseline);
      read(e, "use_mean_map", spec.spinrec.use_mean_map);
      cfg.explainers.push_back(spec);
    }
  }

  if (auto s = root["selector"]) {
    check_keys(s, "selector", {"metric", "k_r", "step_budget"});
    std::string metric = "del";
    std::size_t k_r = 5;
    std::optional<std::size_t> budget;
    read(s, "metric", metric);
    read(s, "k_r", k_r);
    if (s["step_budget"] && !s["step_budget"].IsNull()) budget = s["step_budget"].as<std::size_t>();
    const MetricKind kind = parse_metric_kind(metric);
    cfg.selector = FidelitySelector::for_metric({kind, kind == MetricKind::kPos ? k_r : 0}, budget);
  }

  if (auto m = root["metrics"]) {
    check_keys(m, "metrics", {"names", "k_r", "k_e", "auc", "rank_exclusion", "long_history"});
    if (m["names"]) {
      cfg.metrics.kinds.clear();
      for (const auto& n : m["names"]) cfg.metrics.kinds.push_back(parse_metric_kind(n.as<std::string>()));
    }
    read(m, "k_r", cfg.metrics.k_r);
    read(m, "k_e", cfg.metrics.k_e);
    read(m, "auc", cfg.metrics.auc);
    std::string excl = "perturbed_history";
    read(m, "rank_exclusion", excl);
    cfg.metrics.exclusion = parse_exclusion(excl);
    read(m, "long_history", cfg.metrics.long_history);
  }

  if (auto s = root["sweep"]) {
    check_keys(s, "sweep", {"kappas"});
    read(s, "kappas", cfg.sweep_kappas);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::ordered_json;
  ordered_json j;
  // No output_dir: reports must not depend on where they are written.
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  const auto& d = cfg.dataset;
  j["dataset"] = {{"source", to_string(d.source)},
                  {"path", d.path.string()},
                  {"min_rating", d.load.min_rating},
                  {"test_fraction", d.test_fraction},
                  {"validation_fraction", d.validation_fraction},
                  {"split_seed", d.split_seed ? ordered_json(*d.split_seed) : ordered_json(nullptr)},
                  {"min_history", d.min_history},
                  {"max_test_users", d.max_test_users},
                  {"synthetic",
                   {{"users", d.synthetic.num_users},
                    {"items", d.synthetic.num_items},
                    {"clusters", d.synthetic.num_clusters},
                    {"within_cluster_prob", d.synthetic.within_cluster_prob},
                    {"noise_prob", d.synthetic.noise_prob},
                    {"seed", d.synthetic.seed}}}};
  const auto& t = cfg.model.train;
  j["model"] = {{"kind", to_string(cfg.model.kind)},
                {"checkpoint", cfg.model.checkpoint.string()},
                {"train",
                 {{"dim", t.dim},
                  {"hidden", t.hidden},
                  {"latent", t.latent},
                  {"learning_rate", t.learning_rate},
                  {"epochs", t.epochs},
                  {"negatives", t.negatives},
                  {"batch_size", t.batch_size},
                  {"seed", cfg.model.train_seed_set ? ordered_json(t.seed) : ordered_json(nullptr)},
                  {"weight_decay", t.weight_decay},
                  {"input_dropout", t.input_dropout},
                  {"kl_beta", t.kl_beta},
                  {"kl_anneal_steps", t.kl_anneal_steps},
                  {"max_targets_per_user", t.max_targets_per_user}}}};
  j["explainers"] = ordered_json::array();
  for (const auto& e : cfg.explainers) {
    j["explainers"].push_back({{"name", e.name},
                               {"kind", to_string(e.kind)},
                               {"kappa", e.spinrec.kappa},
                               {"steps", e.spinrec.steps},
                               {"rule", to_string(e.spinrec.rule)},
                               {"include_zero_baseline", e.spinrec.include_zero_baseline},
                               {"use_mean_map", e.spinrec.use_mean_map}});
  }
  j["selector"] = {{"metric", to_string(cfg.selector.metric.kind)},
                   {"k_r", cfg.selector.metric.k_r},
                   {"step_budget", cfg.selector.step_budget ? ordered_json(*cfg.selector.step_budget) : ordered_json(nullptr)},
                   {"maximize", cfg.selector.maximize}};
  std::vector<std::string> names;
  for (auto k : cfg.metrics.kinds) names.emplace_back(to_string(k));
  j["metrics"] = {{"names", names},
                  {"k_r", cfg.metrics.k_r},
                  {"k_e", cfg.metrics.k_e},
                  {"auc", cfg.metrics.auc},
                  {"rank_exclusion", to_string(cfg.metrics.exclusion)},
                  {"long_history", cfg.metrics.long_history}};
  j["reference_method"] = cfg.reference_method;
  j["sweep"] = {{"kappas", cfg.sweep_kappas}};
  return j.dump(2);
}

}  // namespace spinrec
