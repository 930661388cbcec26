import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from flipdetect.cmeasures import CMVector
from flipdetect.data import Dataset
from flipdetect.evaluation import (
    baseline_knn_defense, heatmap, leakage_report, lodo, roc_auc, save_heatmap, save_roc,
)
from flipdetect.metadb import MetaDatabase, MetaRow


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]).auc == 1.0
    assert roc_auc([0.3] * 6, [1, 0] * 3).auc == 0.5
    assert roc_auc([0.9, 0.2, 0.8, 0.1], [1, 0, 0, 1]).auc == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0]) | st.floats(-1, 1),
                          st.booleans()), min_size=2, max_size=50))
def test_auc_equals_mann_whitney(pairs):
    scores = [s for s, _ in pairs]
    labels = [l for _, l in pairs]
    if all(labels) or not any(labels):
        return
    curve = roc_auc(scores, labels)
    assert abs(curve.auc - oracles.mann_whitney_auc(scores, labels)) <= 1e-12
    assert np.all(np.diff(curve.thresholds) > 0)
    assert np.all(np.diff(curve.tpr) <= 0) and np.all(np.diff(curve.fpr) <= 0)
    assert curve.tpr[-1] == curve.fpr[-1] == 0.0


def test_roc_files(tmp_path):
    curve = roc_auc([0.9, 0.2, 0.8, 0.1], [1, 0, 0, 1])
    save_roc(curve, tmp_path / "roc.csv", {"group": "easy"})
    lines = (tmp_path / "roc.csv").read_text().splitlines()
    assert lines[0] == "threshold,fpr,tpr" and len(lines) == 6
    assert '"auc": 0.5' in (tmp_path / "roc.summary.json").read_text()


def test_heatmap_cells():
    scores = {("easy", 0.0): [0.0, 0.01, 0.2], ("easy", 0.1): [0.3, 0.0],
              ("hard", 0.0): [0.5]}
    grid = heatmap(scores, ["easy", "hard"], [0.1, 0.2], 0.05, "diva")
    assert grid.col_axis == [0.0, 0.1, 0.2]
    assert grid.cell("easy", 0.0) == pytest.approx(2 / 3)
    assert grid.cell("easy", 0.1) == 0.5
    assert grid.cell("hard", 0.0) == 0.0
    assert math.isnan(grid.cell("easy", 0.2))
    assert grid.counts.tolist() == [[3, 2, 0], [1, 0, 0]]


def test_heatmap_file(tmp_path):
    grid = heatmap({("easy", 0.0): [0.0]}, ["easy"], [0.1], 0.05, "diva")
    save_heatmap(grid, tmp_path / "h.csv")
    text = (tmp_path / "h.csv").read_text()
    assert "# detector=diva" in text and "row,clean,0.1" in text and "easy,1.0," in text


def test_knn_unanimous_labels_never_relabel():
    X = np.random.default_rng(0).normal(size=(30, 2))
    ds = Dataset(X, np.ones(30, int))
    assert baseline_knn_defense(ds, k=5).relabel_fraction == 0.0


def test_knn_single_mislabeled_point():
    gen = np.random.default_rng(1)
    X = np.vstack([gen.normal(-5, 0.5, size=(10, 2)), gen.normal(5, 0.5, size=(10, 2))])
    y = np.array([0] * 10 + [1] * 10)
    y[3] = 1
    res = baseline_knn_defense(Dataset(X, y), k=5, eta=0.6, dataset_threshold=0.01)
    assert res.relabel_fraction == 0.05
    assert res.sanitized_labels[3] == 0 and res.poisoned


def test_knn_interleaved_clean_data_looks_poisoned():
    gen = np.random.default_rng(2)
    X = gen.normal(size=(200, 2))
    y = (gen.random(200) < 0.5).astype(int)
    X[y == 1] += 0.3
    assert baseline_knn_defense(Dataset(X, y)).relabel_fraction >= 0.15


def test_knn_rejects_large_k():
    with pytest.raises(ValueError):
        baseline_knn_defense(Dataset(np.arange(5.0)[:, None], np.array([0, 1, 0, 1, 0])), k=5)


VARIANTS = [("clean", 0.0), ("sln", 0.1), ("falfa", 0.1), ("alfa", 0.1), ("alfa", 0.2)]


def fake_db(n_sets=4, target=None):
    gen = np.random.default_rng(0)
    rows = []
    for d in range(n_sets):
        for variant, rate in VARIANTS:
            acc = target(variant, rate) if target else gen.uniform(0.5, 1.0)
            rows.append(MetaRow(f"d{d}", variant, rate, 0, CMVector(gen.uniform(size=27)),
                                acc, acc, acc + 0.01, tuple(range(8)), tuple(range(8, 10))))
    return MetaDatabase(rows)


def test_lodo_constant_predictor_limit():
    # every trainable row has the same target, so each fold predicts 0.8;
    # the unseen alfa rows sit at 0.7 and 0.9 around that mean
    def target(variant, rate):
        if variant != "alfa":
            return 0.8
        return 0.7 if rate == 0.1 else 0.9

    res = lodo(fake_db(n_sets=5, target=target), eval_attacks=("alfa",))
    for row in res.table().values():
        assert row["alfa"] == pytest.approx(np.std([0.7, 0.9]), abs=1e-12)


def test_lodo_never_trains_on_held_out():
    res = lodo(fake_db(n_sets=5))
    assert leakage_report(res) == {"dataset_id_leaks": 0, "split_overlap": 0}
    for held, ml in res.learners.items():
        assert all(not rid.startswith(held + "|") for rid in ml.training_row_ids)
        assert all("|alfa|" not in rid for rid in ml.training_row_ids)
    assert {p.row.variant for p in res.predictions} >= {"alfa"}


def test_lodo_needs_three_datasets():
    with pytest.raises(ValueError):
        lodo(fake_db(n_sets=2))
