# Copyright 2026 The spinrec Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Stochastic path-integration explanations for recommenders.

The heavy lifting happens in the compiled ``_spinrec`` extension; this module
re-exports it and adds a few conveniences that return plain Python objects.
"""

import json

from ._spinrec import (
    AttributionError,
    Config,
    DataError,
    Dataset,
    ExperimentError,
    FidelityError,
    Model,
    ModelError,
    _run_experiment,
    auc,
    build_version,
    explain,
    explain_cosine,
    explain_grad_input,
    explain_with_baselines,
    generate_synthetic,
    kappa_sweep,
    load_checkpoint,
    load_ml1m,
    load_snapshot,
    load_tsv,
    metric,
    path_integrate,
    prepare_dataset,
    split_users,
    train_model,
)

__all__ = [
    "AttributionError",
    "Config",
    "DataError",
    "Dataset",
    "ExperimentError",
    "FidelityError",
    "Model",
    "ModelError",
    "auc",
    "build_version",
    "config_dict",
    "explain",
    "explain_cosine",
    "explain_grad_input",
    "explain_with_baselines",
    "generate_synthetic",
    "kappa_sweep",
    "load_checkpoint",
    "load_ml1m",
    "load_snapshot",
    "load_tsv",
    "metric",
    "path_integrate",
    "prepare_dataset",
    "run_experiment",
    "split_users",
    "train_model",
]

__version__ = "0.1.0"


def run_experiment(config):
    """Runs the full evaluation and returns the aggregate report as a dict.

    When ``config.output_dir`` is set, observations.csv, report.json and
    report.txt are written there as well.
    """
    return json.loads(_run_experiment(config))


def config_dict(config):
    """Every configuration field as a nested dict."""
    return json.loads(config.to_json())

