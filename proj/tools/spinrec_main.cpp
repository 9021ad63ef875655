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

// spinrec command-line tool.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spinrec/experiment.hpp"
#include "spinrec/random.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace spinrec {
namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
  std::string checkpoint;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_checkpoint) {
  cmd->add_option("--config", o.config, "experiment config (YAML); defaults when omitted")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed, overrides the config");
  cmd->add_option("--workers", o.workers, "worker threads, overrides the config")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory, overrides the config");
  if (with_checkpoint) cmd->add_option("--checkpoint", o.checkpoint, "load this model instead of training");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig::defaults() : load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.checkpoint.empty()) cfg.model.checkpoint = o.checkpoint;
  if (cfg.output_dir.empty()) cfg.output_dir = "out";
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ExperimentError("cannot write " + path.string());
  out << text;
}

std::string train_manifest(const ExperimentConfig& cfg, const ParametricModel& model, const TrainReport& report,
                           std::uint64_t train_seed) {
  std::ostringstream m;
  m << std::setprecision(10);
  m << "format: spinrec-checkpoint-v1\n";
  m << "version: " << build_version() << "\n";
  m << "kind: " << to_string(model.kind()) << "\n";
  m << "num_items: " << model.num_items() << "\n";
  m << "dims:";
  for (auto d : model.dims()) m << ' ' << d;
  m << "\nparameters: " << model.parameter_count() << "\n";
  m << "master_seed: " << cfg.seed << "\n";
  m << "train_seed: " << train_seed << "\n";
  m << "validation_recall_at_10: " << report.validation_recall_at_10 << "\n";
  m << "epoch_loss:";
  for (double l : report.epoch_loss) m << ' ' << l;
  m << "\nconfig: " << ordered_json::parse(config_to_json(cfg)).dump() << "\n";
  return m.str();
}

int cmd_train(const CommonOptions& o) {
  ExperimentConfig cfg = resolve(o);
  cfg.model.checkpoint.clear();
  const auto ds = prepare_dataset(cfg);
  const auto trained = prepare_model(cfg, ds);
  const std::uint64_t train_seed = cfg.model.train_seed_set ? cfg.model.train.seed : derive_seed(cfg.seed, 0x7e);
  fs::create_directories(cfg.output_dir);
  save_checkpoint(*trained.model, cfg.output_dir / "model.bin");
  write_text(cfg.output_dir / "model.manifest.txt", train_manifest(cfg, *trained.model, trained.report, train_seed));
  save_snapshot(ds, cfg.output_dir / "dataset.snap");
  std::cout << "trained " << to_string(cfg.model.kind) << " on " << ds.num_users() << " users x " << ds.num_items()
            << " items, " << trained.model->parameter_count() << " parameters, validation recall@10 "
            << trained.report.validation_recall_at_10 << "\nwrote " << (cfg.output_dir / "model.bin").string()
            << "\n";
  return 0;
}

int cmd_explain(const CommonOptions& o, const std::vector<UserId>& only_users, const std::string& method) {
  const ExperimentConfig cfg = resolve(o);
  const auto ds = prepare_dataset(cfg);
  const auto trained = prepare_model(cfg, ds);
  const auto& model = *trained.model;
  std::vector<UserId> users = only_users.empty() ? evaluable_users(cfg, ds, model.num_items()) : only_users;
  // One method per run keeps the TSV a plain four-column table.
  auto it = std::find_if(cfg.explainers.begin(), cfg.explainers.end(), [&](const ExplainerSpec& e) {
    return method.empty() ? e.kind == ExplainerKind::kSpinRec : e.name == method;
  });
  if (it == cfg.explainers.end()) {
    throw ExperimentError(method.empty() ? "config has no spinrec explainer" : "no explainer named '" + method + "'");
  }
  const ExplainerSpec spec = *it;

  for (UserId u : users) {
    if (u >= ds.num_users()) throw ExperimentError("user " + std::to_string(u) + " out of range");
    if (ds.user_vector(u).empty()) throw ExperimentError("user " + std::to_string(u) + " has an empty history");
  }

  fs::create_directories(cfg.output_dir);
  std::ofstream tsv(cfg.output_dir / "explanations.tsv");
  tsv << std::setprecision(12);
  tsv << "user\ttarget_item\titem\tscore\n";
  ordered_json records = ordered_json::array();
  for (UserId u : users) {
    const UserVector x = ds.user_vector(u);
    const ItemId y = recommend_top1(model, x);
    const auto out = run_explainer(spec, model, ds, x, y, user_seed(cfg.seed, u), cfg.selector, {});
    const auto order = explanation_order(out.map, x);
    ordered_json rec;
    rec["user"] = u;
    if (!ds.external_user_ids().empty()) rec["external_user"] = ds.external_user_ids()[u];
    rec["target_item"] = y;
    rec["method"] = spec.name;
    rec["kind"] = to_string(spec.kind);
    rec["items"] = order;
    std::vector<double> scores;
    for (ItemId i : order) {
      scores.push_back(out.map.scores[i]);
      tsv << u << '\t' << y << '\t' << i << '\t' << out.map.scores[i] << '\n';
    }
    rec["scores"] = scores;
    if (out.spinrec) {
      rec["selected_baseline"] = out.spinrec->selected_index;
      rec["selector_score"] = out.spinrec->selector_score;
      rec["candidate_scores"] = out.spinrec->candidate_scores;
    }
    records.push_back(rec);
  }
  ordered_json doc;
  doc["version"] = build_version();
  doc["config"] = ordered_json::parse(config_to_json(cfg));
  doc["explanations"] = records;
  write_text(cfg.output_dir / "explanations.json", doc.dump(2) + "\n");
  std::cout << "explained " << users.size() << " users with " << spec.name << "; wrote "
            << (cfg.output_dir / "explanations.tsv").string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const auto report = run_experiment(cfg);
  std::cout << report_to_table(report);
  std::cout << "wrote " << (cfg.output_dir / "report.json").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonOptions& o, std::vector<std::size_t> kappas) {
  const ExperimentConfig cfg = resolve(o);
  if (kappas.empty()) kappas = cfg.sweep_kappas;
  const auto ds = prepare_dataset(cfg);
  const auto trained = prepare_model(cfg, ds);
  const auto sweep = kappa_sweep(cfg, ds, *trained.model, kappas);
  fs::create_directories(cfg.output_dir);
  std::ofstream summary(cfg.output_dir / "kappa_sweep.csv");
  std::ofstream per_user(cfg.output_dir / "kappa_sweep_users.csv");
  summary << std::setprecision(12) << "kappa,mean_fidelity,predicted_cost\n";
  per_user << std::setprecision(12) << "user,kappa,fidelity\n";
  std::cout << "kappa  mean selector fidelity  predicted cost\n";
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    ExperimentConfig at = cfg;
    for (auto& e : at.explainers) e.spinrec.kappa = kappas[k];
    const auto cost = estimate_cost(at, trained.model->parameter_count(), ds.num_items());
    summary << kappas[k] << ',' << sweep.mean_fidelity[k] << ',' << cost.predicted << '\n';
    std::cout << std::setw(5) << kappas[k] << "  " << std::setw(22) << std::fixed << std::setprecision(6)
              << sweep.mean_fidelity[k] << "  " << std::setw(14) << std::scientific << std::setprecision(3)
              << cost.predicted << std::defaultfloat << '\n';
  }
  for (std::size_t i = 0; i < sweep.users.size(); ++i) {
    for (std::size_t k = 0; k < kappas.size(); ++k) {
      per_user << sweep.users[i] << ',' << kappas[k] << ',' << sweep.per_user[i][k] << '\n';
    }
  }
  std::cout << sweep.users.size() << " users; wrote " << (cfg.output_dir / "kappa_sweep.csv").string() << "\n";
  return 0;
}

// Rebuilds the table (and optionally a copy of the JSON) from an existing report.json.
int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  const fs::path path = fs::path(in_dir) / "report.json";
  std::ifstream in(path);
  if (!in) throw ExperimentError("cannot open " + path.string());
  const auto j = ordered_json::parse(in);
  FidelityReport report;
  report.reference_method = j.at("reference_method").get<std::string>();
  report.users.resize(j.at("evaluated_users").get<std::size_t>());
  for (const auto& c : j.at("cells")) {
    ReportCell cell;
    cell.method = c.at("method").get<std::string>();
    cell.metric.kind = parse_metric_kind(c.at("metric").get<std::string>());
    if (c.at("k_r").is_number()) cell.metric.k_r = c.at("k_r").get<std::size_t>();
    if (c.at("k_e").is_number()) cell.k_e = c.at("k_e").get<std::size_t>();
    // NaN serialises as null.
    cell.mean = c.at("mean").is_number() ? c.at("mean").get<double>() : std::nan("");
    cell.stddev = c.at("std").is_number() ? c.at("std").get<double>() : std::nan("");
    cell.users = c.at("users").get<std::size_t>();
    if (c.at("p_value").is_number()) cell.p_value = c.at("p_value").get<double>();
    report.cells.push_back(cell);
  }
  const std::string table = report_to_table(report);
  std::cout << "build " << j.at("version").get<std::string>() << ", reference " << report.reference_method << "\n\n"
            << table;
  std::cout << "p-values vs " << report.reference_method << " (AUC):\n";
  for (const auto& c : report.cells) {
    if (c.k_e || !c.p_value) continue;
    std::cout << "  " << std::left << std::setw(14) << c.method << std::setw(8) << c.metric.label() << std::right
              << std::scientific << std::setprecision(3) << *c.p_value << std::defaultfloat << "\n";
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.txt", table);
  }
  return 0;
}

}  // namespace
}  // namespace spinrec

int main(int argc, char** argv) {
  using namespace spinrec;
  CLI::App app{"spinrec: stochastic path-integration explanations for recommenders"};
  app.set_version_flag("--version", build_version());
  app.require_subcommand(1);

  CommonOptions train_o, explain_o, eval_o, sweep_o;
  auto* train_cmd = app.add_subcommand("train", "train a model and write model.bin, its manifest and dataset.snap");
  add_common(train_cmd, train_o, false);

  auto* explain_cmd = app.add_subcommand("explain", "write explanations.tsv and explanations.json");
  add_common(explain_cmd, explain_o, true);
  std::vector<UserId> users;
  std::string method;
  explain_cmd->add_option("--user", users, "internal user index (repeatable); default: evaluable test users");
  explain_cmd->add_option("--method", method, "explainer name from the config; default: the first spinrec one");

  auto* eval_cmd = app.add_subcommand("evaluate", "run every explainer and metric; write CSV, JSON and table");
  add_common(eval_cmd, eval_o, true);

  auto* sweep_cmd = app.add_subcommand("sweep-kappa", "nested kappa sweep of the SPINRec selector fidelity");
  add_common(sweep_cmd, sweep_o, true);
  std::vector<std::size_t> kappas;
  sweep_cmd->add_option("--kappas", kappas, "ascending kappa values; default: sweep.kappas from the config");

  auto* report_cmd = app.add_subcommand("report", "print the table for an existing report.json");
  std::string report_in, report_out;
  report_cmd->add_option("--in", report_in, "directory holding report.json")->required();
  report_cmd->add_option("--out", report_out, "also write report.txt here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return cmd_train(train_o);
    if (*explain_cmd) return cmd_explain(explain_o, users, method);
    if (*eval_cmd) return cmd_evaluate(eval_o);
    if (*sweep_cmd) return cmd_sweep(sweep_o, kappas);
    if (*report_cmd) return cmd_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "spinrec: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
