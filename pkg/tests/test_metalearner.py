import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flipdetect import metalearner as ml_mod
from flipdetect.metalearner import (
    MetaLearner, cv_rmse, fit_arrays, group_folds, normal_equation_residual, predict_clean_acc,
    ridge_solve,
)


def planted(seed=0, rows=120, noise=0.01):
    gen = np.random.default_rng(seed)
    X = gen.uniform(0, 1, size=(rows, 27))
    y = 0.5 + 0.4 * X[:, 0] + gen.normal(scale=noise, size=rows)
    groups = [f"ds{i // 6}" for i in range(rows)]
    return X, y, groups


def test_constant_target():
    X, _, groups = planted()
    ml = fit_arrays(X, np.full(len(X), 0.5), groups)
    assert np.abs(ml.weights).max() < 1e-12
    assert ml.bias == 0.5
    assert np.abs(ml.predict(X) - 0.5).max() <= 1e-9


def test_planted_signal_recovered():
    X, y, groups = planted()
    ml = fit_arrays(X, y, groups)
    assert ml.cv_rmse[ml.alpha] <= 0.02
    assert np.argmax(np.abs(ml.weights)) == 0


def test_huge_alpha_shrinks():
    X, y, groups = planted()
    assert np.linalg.norm(fit_arrays(X, y, groups, alpha_grid=(1e6,)).weights) <= 1e-3


def test_mean_features_predict_bias():
    X, y, groups = planted()
    ml = fit_arrays(X, y, groups)
    assert predict_clean_acc(ml, X.mean(axis=0)) == pytest.approx(y.mean(), abs=1e-12)


def test_output_clamped():
    ml = MetaLearner(np.zeros(27), -0.03, 1.0, np.zeros(27), np.ones(27))
    assert predict_clean_acc(ml, np.zeros(27)) == 0.0
    ml = MetaLearner(np.zeros(27), 1.2, 1.0, np.zeros(27), np.ones(27))
    assert predict_clean_acc(ml, np.zeros(27)) == 1.0


def test_length_mismatch():
    X, y, groups = planted()
    with pytest.raises(ValueError):
        predict_clean_acc(fit_arrays(X, y, groups), np.zeros(5))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), alpha=st.sampled_from([0.01, 1.0, 100.0]))
def test_normal_equations_hold(seed, alpha):
    X, y, groups = planted(seed, rows=60, noise=0.1)
    ml = fit_arrays(X, y, groups, alpha_grid=(alpha,))
    assert normal_equation_residual(ml, X, y) <= 1e-8


def test_ties_choose_larger_alpha(monkeypatch):
    X, y, groups = planted()
    monkeypatch.setattr(ml_mod, "cv_rmse", lambda *a, **k: 0.1)
    assert fit_arrays(X, y, groups).alpha == 100.0


def test_group_folds_keep_datasets_together():
    groups = [f"g{i % 7}" for i in range(70)]
    folds, k = group_folds(groups, 5, seed=3)
    assert k == 5
    for g in set(groups):
        assert len({folds[i] for i, h in enumerate(groups) if h == g}) == 1
    _, k = group_folds(groups[:3], 5, seed=3)
    assert k == 3


def test_cv_rmse_of_constant_model_is_target_spread():
    X, _, groups = planted()
    y = np.full(len(X), 0.7)
    assert cv_rmse(X, y, groups, 1.0, 5, 0) == pytest.approx(0.0, abs=1e-12)


def test_too_few_rows():
    X, y, groups = planted(rows=9)
    with pytest.raises(ValueError):
        fit_arrays(X, y, groups)


def test_ridge_solve_matches_lstsq():
    gen = np.random.default_rng(1)
    Xs = gen.normal(size=(40, 5))
    y = gen.normal(size=40)
    w, b = ridge_solve(Xs, y, 2.0)
    A = np.vstack([Xs, np.sqrt(2.0) * np.eye(5)])
    ref = np.linalg.lstsq(A, np.concatenate([y - y.mean(), np.zeros(5)]), rcond=None)[0]
    np.testing.assert_allclose(w, ref, atol=1e-10)
    assert b == y.mean()


def test_round_trip(tmp_path):
    X, y, groups = planted()
    ml = fit_arrays(X, y, groups, row_ids=[f"r{i}" for i in range(len(X))])
    ml.save(tmp_path / "ml.json")
    back = MetaLearner.load(tmp_path / "ml.json")
    np.testing.assert_array_equal(back.predict(X), ml.predict(X))
    assert back.training_row_ids == ml.training_row_ids
    obj = ml.to_dict()
    obj["schema_version"] = 42
    with pytest.raises(ValueError):
        MetaLearner.from_dict(obj)
