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
"""Smoke tests for the Python bindings."""

import json

import numpy as np
import pytest

import spinrec

TINY = """
seed: 11
dataset:
  max_test_users: 6
  synthetic: {users: 80, items: 40}
model:
  kind: ncf
  train: {dim: 8, hidden: [12, 6], epochs: 5}
metrics: {k_r: [5], k_e: [2]}
"""


@pytest.fixture(scope="module")
def trained():
    cfg = spinrec.Config.from_yaml(TINY)
    ds = spinrec.prepare_dataset(cfg)
    model, losses, recall = spinrec.train_model(cfg, ds)
    return cfg, ds, model, losses, recall


def a_test_user(ds):
    return next(u for u in ds.users_in("test") if len(ds.items_of(u)) >= 3)


def test_synthetic_dataset_shape():
    ds = spinrec.generate_synthetic(users=50, items=30, seed=3)
    assert ds.num_users == 50
    assert ds.num_items == 30
    assert sum(len(ds.items_of(u)) for u in range(ds.num_users)) == ds.num_interactions
    split = spinrec.split_users(ds, 0.2, 0.1, 9)
    # [DERIVED] user-level split keeps every user in exactly one split
    assert sum(split.split_counts()) == 50
    assert split.split_counts()[2] == len(split.users_in("test"))


def test_snapshot_round_trip(tmp_path):
    ds = spinrec.split_users(spinrec.generate_synthetic(users=40, items=20, seed=2), 0.2, 0.1, 1)
    ds.save(tmp_path / "d.snap")
    assert spinrec.load_snapshot(tmp_path / "d.snap") == ds


def test_tsv_loader(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_text("7\t100\n7\t200\n3\t200\n")
    ds = spinrec.load_tsv(path)
    assert (ds.num_users, ds.num_items, ds.num_interactions) == (2, 2, 3)
    assert ds.external_user_ids == [3, 7]
    assert ds.external_item_ids == [100, 200]


def test_config_defaults_and_overrides():
    cfg = spinrec.Config()
    d = spinrec.config_dict(cfg)
    assert d["seed"] == 42
    cfg.seed = 9
    assert spinrec.config_dict(cfg)["seed"] == 9
    with pytest.raises(Exception, match="unknown"):
        spinrec.Config.from_yaml("bogus_key: 1")


def test_training_reports(trained):
    _, ds, model, losses, recall = trained
    assert model.kind == "ncf"
    assert model.num_items == ds.num_items
    assert len(losses) == 5
    assert 0.0 <= recall <= 1.0


def test_scores_and_gradient(trained):
    _, ds, model, _, _ = trained
    u = a_test_user(ds)
    history = ds.items_of(u)
    all_scores = model.score_all(history)
    assert all_scores.shape == (ds.num_items,)
    for item in (0, 5, ds.num_items - 1):
        assert model.score(history, item) == pytest.approx(all_scores[item], abs=1e-12)
    x = np.zeros(ds.num_items)
    x[history] = 1.0
    g = model.gradient(x, 4)
    h = 1e-6
    for i in (history[0], 1, 2):
        e = np.zeros_like(x)
        e[i] = h
        # [DERIVED] central finite difference of the score
        fd = (model.score_dense(x + e, 4) - model.score_dense(x - e, 4)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)
    top = model.recommend(history)
    assert top not in history
    assert model.rank(history, top) == 1


def test_path_integration_completeness(trained):
    _, ds, model, _, _ = trained
    u = a_test_user(ds)
    history = ds.items_of(u)
    y = model.recommend(history)
    # The pooled input has a kink at t = 1/|x|; a multiple of |x| steps puts it
    # on a cell boundary so the midpoint rule stays second order.
    m = spinrec.path_integrate(model, history, y, steps=128 * len(history))
    delta = model.score(history, y) - model.score([], y)
    # [DERIVED] completeness: attributions sum to f(x) - f(0) up to O(1/J^2)
    assert m.sum() == pytest.approx(delta, rel=1e-4, abs=1e-6)
    outside = np.setdiff1d(np.arange(ds.num_items), history)
    assert np.all(m[outside] == 0.0)


def test_explain_selects_best_candidate(trained):
    _, ds, model, _, _ = trained
    u = a_test_user(ds)
    history = ds.items_of(u)
    y = model.recommend(history)
    r = spinrec.explain(model, ds, history, y, kappa=4, seed=123)
    scores = r["candidate_scores"]
    assert len(scores) == 5
    # [DERIVED] argmax with ties to the lowest index
    assert r["selected_baseline"] == int(np.argmax(scores))
    assert r["selector_score"] == max(scores)
    # [DERIVED] default selector is the negated deletion AUC of the chosen map
    assert r["selector_score"] == pytest.approx(-spinrec.auc(model, history, y, r["scores"], "del"), abs=1e-12)
    assert sorted(r["order"]) == sorted(history)
    again = spinrec.explain(model, ds, history, y, kappa=4, seed=123)
    assert np.array_equal(again["scores"], r["scores"])


def test_zero_baseline_matches_plain_integration(trained):
    _, ds, model, _, _ = trained
    u = a_test_user(ds)
    history = ds.items_of(u)
    y = model.recommend(history)
    r = spinrec.explain_with_baselines(model, history, y, [[]])
    assert r["selected_baseline"] == 0
    assert np.array_equal(r["scores"], spinrec.path_integrate(model, history, y))


def test_metrics_in_range(trained):
    _, ds, model, _, _ = trained
    u = a_test_user(ds)
    history = ds.items_of(u)
    y = model.recommend(history)
    m = spinrec.explain_cosine(model, history, y)
    assert spinrec.metric(model, history, y, m, "pos", 1, k_r=ds.num_items) == 1.0
    cdcg = spinrec.metric(model, history, y, m, "cdcg", 1)
    assert 0.0 < cdcg <= 1.0
    # [DERIVED] removing every item gives the empty-history score ratio
    full = spinrec.metric(model, history, y, m, "del", len(history))
    assert full == pytest.approx(model.score([], y) / model.score(history, y), rel=1e-12)


def test_checkpoint_round_trip(trained, tmp_path):
    _, ds, model, _, _ = trained
    model.save(tmp_path / "m.bin")
    loaded = spinrec.load_checkpoint(tmp_path / "m.bin")
    history = ds.items_of(a_test_user(ds))
    # Parameters are stored as float32.
    np.testing.assert_allclose(loaded.score_all(history), model.score_all(history), rtol=1e-5)


def test_run_experiment_and_sweep(tmp_path):
    cfg = spinrec.Config.from_yaml(TINY)
    cfg.output_dir = str(tmp_path)
    report = spinrec.run_experiment(cfg)
    assert report["evaluated_users"] == 6
    methods = {c["method"] for c in report["cells"]}
    assert methods == {"spinrec", "pi", "cosine", "grad_input", "random"}
    assert json.loads((tmp_path / "report.json").read_text()) == report
    assert (tmp_path / "observations.csv").read_text().startswith("user,method,metric,k_r,k_e,value\n")
    sweep = spinrec.kappa_sweep(cfg, [1, 2, 4])
    for row in sweep["per_user"]:
        assert row[0] <= row[1] <= row[2]


def test_errors_are_translated(trained):
    _, _, model, _, _ = trained
    with pytest.raises(ValueError):
        model.score([1, 1], 0)
    with pytest.raises(ValueError):
        model.score([model.num_items], 0)
