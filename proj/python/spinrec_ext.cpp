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

// Python bindings for the spinrec core.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spinrec/experiment.hpp"
#include "spinrec/models.hpp"

namespace py = pybind11;
using namespace spinrec;

namespace {

// Python-side handle; models are immutable once trained or loaded.
struct Model {
  std::shared_ptr<const ParametricModel> impl;
};

UserVector history_of(const Model& m, std::vector<ItemId> items) {
  return UserVector(std::move(items), m.impl->num_items());
}

ExplanationMap map_of(ItemId target, const Vec& scores) {
  ExplanationMap map;
  map.target = target;
  map.scores = scores;
  return map;
}

std::vector<std::size_t> split_counts(const InteractionDataset& ds) {
  std::vector<std::size_t> counts(3, 0);
  for (Split s : ds.splits()) ++counts[static_cast<std::size_t>(s)];
  return counts;
}

Split parse_split(const std::string& name) {
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    if (name == to_string(s)) return s;
  }
  throw py::value_error("unknown split '" + name + "'");
}

FidelitySelector make_selector(const std::string& metric, std::size_t k_r, std::optional<std::size_t> budget) {
  return FidelitySelector::for_metric({parse_metric_kind(metric), k_r}, budget);
}

py::dict explanation_dict(const SpinRecResult& r, const UserVector& x) {
  py::dict d;
  d["scores"] = r.map.scores;
  d["order"] = explanation_order(r.map, x);
  d["selected_baseline"] = r.selected_index;
  d["selector_score"] = r.selector_score;
  d["candidate_scores"] = r.candidate_scores;
  return d;
}

}  // namespace

PYBIND11_MODULE(_spinrec, m) {
  m.doc() = "Stochastic path-integration explanations for recommenders";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_RuntimeError);
  py::register_exception<AttributionError>(m, "AttributionError", PyExc_RuntimeError);
  py::register_exception<FidelityError>(m, "FidelityError", PyExc_ValueError);
  py::register_exception<ExperimentError>(m, "ExperimentError", PyExc_RuntimeError);

  py::class_<InteractionDataset>(m, "Dataset")
      .def_property_readonly("num_users", &InteractionDataset::num_users)
      .def_property_readonly("num_items", &InteractionDataset::num_items)
      .def_property_readonly("num_interactions", &InteractionDataset::num_interactions)
      .def(
          "items_of",
          [](const InteractionDataset& ds, UserId u) {
            if (u >= ds.num_users()) throw py::index_error("user out of range");
            auto items = ds.items_of(u);
            return std::vector<ItemId>(items.begin(), items.end());
          },
          py::arg("user"))
      .def(
          "split_of",
          [](const InteractionDataset& ds, UserId u) {
            if (u >= ds.num_users()) throw py::index_error("user out of range");
            return std::string(to_string(ds.split_of(u)));
          },
          py::arg("user"))
      .def(
          "users_in", [](const InteractionDataset& ds, const std::string& s) { return ds.users_in(parse_split(s)); },
          py::arg("split"))
      .def("split_counts", &split_counts, "Users per split as [train, validation, test].")
      .def_property_readonly("external_user_ids",
                             [](const InteractionDataset& ds) {
                               auto ids = ds.external_user_ids();
                               return std::vector<std::int64_t>(ids.begin(), ids.end());
                             })
      .def_property_readonly("external_item_ids",
                             [](const InteractionDataset& ds) {
                               auto ids = ds.external_item_ids();
                               return std::vector<std::int64_t>(ids.begin(), ids.end());
                             })
      .def("save", [](const InteractionDataset& ds, const std::filesystem::path& p) { save_snapshot(ds, p); },
           py::arg("path"))
      .def("__eq__", [](const InteractionDataset& a, const InteractionDataset& b) { return a == b; });

  m.def(
      "generate_synthetic",
      [](std::size_t users, std::size_t items, std::size_t clusters, double within, double noise,
         std::uint64_t seed) { return generate_synthetic(SynthConfig{users, items, clusters, within, noise, seed}); },
      py::arg("users") = 200, py::arg("items") = 100, py::arg("clusters") = 4, py::arg("within") = 0.6,
      py::arg("noise") = 0.02, py::arg("seed") = 1, "Planted-cluster implicit-feedback data (unsplit).");
  m.def(
      "load_ml1m",
      [](const std::filesystem::path& p, double min_rating) {
        LoadOptions opts;
        opts.min_rating = min_rating;
        return load_ml1m(p, opts);
      },
      py::arg("path"), py::arg("min_rating") = 0.0);
  m.def("load_tsv", &load_tsv, py::arg("path"));
  m.def("load_snapshot", &load_snapshot, py::arg("path"));
  m.def("split_users", &split_users, py::arg("dataset"), py::arg("test_fraction"), py::arg("validation_fraction"),
        py::arg("seed"));

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init([]() { return ExperimentConfig::defaults(); }))
      .def_static("from_yaml", &parse_experiment_config, py::arg("text"))
      .def_static("load", &load_experiment_config, py::arg("path"))
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("workers", &ExperimentConfig::workers)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("reference_method", &ExperimentConfig::reference_method)
      .def_readwrite("sweep_kappas", &ExperimentConfig::sweep_kappas)
      .def_property(
          "checkpoint", [](const ExperimentConfig& c) { return c.model.checkpoint; },
          [](ExperimentConfig& c, const std::filesystem::path& p) { c.model.checkpoint = p; })
      .def_property(
          "max_test_users", [](const ExperimentConfig& c) { return c.dataset.max_test_users; },
          [](ExperimentConfig& c, std::size_t n) { c.dataset.max_test_users = n; })
      .def("validate", &ExperimentConfig::validate)
      .def("to_json", &config_to_json);

  py::class_<Model>(m, "Model")
      .def_property_readonly("kind", [](const Model& md) { return std::string(to_string(md.impl->kind())); })
      .def_property_readonly("num_items", [](const Model& md) { return md.impl->num_items(); })
      .def_property_readonly("parameter_count", [](const Model& md) { return md.impl->parameter_count(); })
      .def(
          "score",
          [](const Model& md, std::vector<ItemId> history, ItemId item) {
            return md.impl->score(history_of(md, std::move(history)).dense(), item);
          },
          py::arg("history"), py::arg("item"))
      .def(
          "score_all",
          [](const Model& md, std::vector<ItemId> history) {
            return md.impl->score_all(history_of(md, std::move(history)).dense());
          },
          py::arg("history"))
      .def(
          "score_dense", [](const Model& md, const Vec& x, ItemId item) { return md.impl->score(x, item); },
          py::arg("x"), py::arg("item"), "Score at an arbitrary real-valued input vector.")
      .def(
          "gradient", [](const Model& md, const Vec& x, ItemId item) { return md.impl->grad_input(x, item); },
          py::arg("x"), py::arg("item"), "Gradient of the item score with respect to the input vector.")
      .def(
          "recommend",
          [](const Model& md, std::vector<ItemId> history) {
            return recommend_top1(*md.impl, history_of(md, std::move(history)));
          },
          py::arg("history"), "Highest-scoring item outside the history.")
      .def(
          "rank",
          [](const Model& md, std::vector<ItemId> history, ItemId item) {
            const auto x = history_of(md, std::move(history));
            return rank_in_scores(md.impl->score_all(x.dense()), item, &x);
          },
          py::arg("history"), py::arg("item"), "1-based rank of item among non-history items.")
      .def(
          "save", [](const Model& md, const std::filesystem::path& p) { save_checkpoint(*md.impl, p); },
          py::arg("path"));

  m.def(
      "load_checkpoint", [](const std::filesystem::path& p) { return Model{load_checkpoint(p)}; }, py::arg("path"));
  m.def(
      "prepare_dataset", [](const ExperimentConfig& cfg) { return prepare_dataset(cfg); }, py::arg("config"),
      "Loads or generates the configured dataset and applies the user split.");
  m.def(
      "train_model",
      [](const ExperimentConfig& cfg, const InteractionDataset& ds) {
        TrainedModel trained;
        {
          py::gil_scoped_release release;
          trained = prepare_model(cfg, ds);
        }
        return py::make_tuple(Model{trained.model}, trained.report.epoch_loss,
                              trained.report.validation_recall_at_10);
      },
      py::arg("config"), py::arg("dataset"),
      "Trains (or loads config.checkpoint); returns (model, epoch_losses, validation_recall_at_10).");

  m.def(
      "path_integrate",
      [](const Model& md, std::vector<ItemId> history, ItemId target, std::optional<std::vector<ItemId>> baseline,
         std::size_t steps, const std::string& rule) {
        const auto x = history_of(md, std::move(history));
        const Vec z = baseline ? history_of(md, *baseline).dense() : Vec::Zero(md.impl->num_items());
        return path_integrate(*md.impl, x, target, PathSpec{z, steps, parse_integration_rule(rule)}).scores;
      },
      py::arg("model"), py::arg("history"), py::arg("target"), py::arg("baseline") = py::none(),
      py::arg("steps") = 64, py::arg("rule") = "midpoint");

  m.def(
      "explain",
      [](const Model& md, const InteractionDataset& ds, std::vector<ItemId> history, ItemId target,
         std::size_t kappa, std::size_t steps, std::uint64_t seed, bool include_zero, bool use_mean_map,
         const std::string& selector, std::size_t k_r, std::optional<std::size_t> step_budget) {
        const auto x = history_of(md, std::move(history));
        SpinRecConfig cfg;
        cfg.kappa = kappa;
        cfg.steps = steps;
        cfg.seed = seed;
        cfg.include_zero_baseline = include_zero;
        cfg.use_mean_map = use_mean_map;
        const auto r = spinrec_explain(*md.impl, ds, x, target, cfg, make_selector(selector, k_r, step_budget));
        return explanation_dict(r, x);
      },
      py::arg("model"), py::arg("dataset"), py::arg("history"), py::arg("target"), py::arg("kappa") = 10,
      py::arg("steps") = 64, py::arg("seed") = 0, py::arg("include_zero_baseline") = true,
      py::arg("use_mean_map") = false, py::arg("selector") = "del", py::arg("k_r") = 5,
      py::arg("step_budget") = py::none(),
      "SPINRec with baselines sampled from the dataset's train users.");

  m.def(
      "explain_with_baselines",
      [](const Model& md, std::vector<ItemId> history, ItemId target, const std::vector<std::vector<ItemId>>& bases,
         std::size_t steps, const std::string& selector, std::size_t k_r, std::optional<std::size_t> step_budget) {
        const auto x = history_of(md, std::move(history));
        std::vector<UserVector> baselines;
        for (const auto& b : bases) baselines.push_back(history_of(md, b));
        SpinRecConfig cfg;
        cfg.steps = steps;
        const auto r = spinrec_explain(*md.impl, x, target, baselines, cfg, make_selector(selector, k_r, step_budget));
        return explanation_dict(r, x);
      },
      py::arg("model"), py::arg("history"), py::arg("target"), py::arg("baselines"), py::arg("steps") = 64,
      py::arg("selector") = "del", py::arg("k_r") = 5, py::arg("step_budget") = py::none(),
      "SPINRec over an explicit list of baseline histories.");

  m.def(
      "explain_cosine",
      [](const Model& md, std::vector<ItemId> history, ItemId target) {
        return explain_cosine(*md.impl, history_of(md, std::move(history)), target).scores;
      },
      py::arg("model"), py::arg("history"), py::arg("target"));
  m.def(
      "explain_grad_input",
      [](const Model& md, std::vector<ItemId> history, ItemId target) {
        return explain_grad_input(*md.impl, history_of(md, std::move(history)), target).scores;
      },
      py::arg("model"), py::arg("history"), py::arg("target"));

  m.def(
      "metric",
      [](const Model& md, std::vector<ItemId> history, ItemId target, const Vec& scores, const std::string& name,
         std::size_t k_e, std::size_t k_r) {
        const auto x = history_of(md, std::move(history));
        return metric_at(*md.impl, x, target, map_of(target, scores), {parse_metric_kind(name), k_r}, k_e);
      },
      py::arg("model"), py::arg("history"), py::arg("target"), py::arg("scores"), py::arg("name"), py::arg("k_e"),
      py::arg("k_r") = 5, "Fidelity after removing (or keeping) the top-k_e explained items.");
  m.def(
      "auc",
      [](const Model& md, std::vector<ItemId> history, ItemId target, const Vec& scores, const std::string& name,
         std::size_t k_r) {
        const auto x = history_of(md, std::move(history));
        return auc_curve(*md.impl, x, target, map_of(target, scores), {parse_metric_kind(name), k_r});
      },
      py::arg("model"), py::arg("history"), py::arg("target"), py::arg("scores"), py::arg("name"),
      py::arg("k_r") = 5, "Mean fidelity over progressive one-item perturbation steps.");

  m.def(
      "_run_experiment",
      [](const ExperimentConfig& cfg) {
        FidelityReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(cfg);
        }
        return report_to_json(report, cfg);
      },
      py::arg("config"));
  m.def(
      "kappa_sweep",
      [](const ExperimentConfig& cfg, const std::vector<std::size_t>& kappas) {
        KappaSweep s;
        {
          py::gil_scoped_release release;
          s = kappa_sweep(cfg, kappas);
        }
        py::dict d;
        d["kappas"] = s.kappas;
        d["mean_fidelity"] = s.mean_fidelity;
        d["users"] = s.users;
        d["per_user"] = s.per_user;
        return d;
      },
      py::arg("config"), py::arg("kappas"), "Nested kappa sweep of per-user selector fidelity.");
  m.def("build_version", &build_version);
}
