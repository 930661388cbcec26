"""Ridge regression from complexity measures to clean test accuracy."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._seeding import rng
from .cmeasures import CMVector, measure_names
from .metadb import MetaDatabase

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.01, 0.1, 1.0, 10.0, 100.0)
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MetaLearner:
    weights: np.ndarray
    bias: float
    alpha: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    training_row_ids: tuple = ()
    cv_rmse: dict = field(default_factory=dict, compare=False)

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, float) - self.feature_means) / self.feature_stds

    def raw_predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.weights.size:
            raise ValueError(f"expected {self.weights.size} measures, got {X.shape[1]}")
        return self.standardize(X) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return np.clip(self.raw_predict(X), 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "measures": measure_names(),
                "weights": self.weights.tolist(), "bias": self.bias, "alpha": self.alpha,
                "feature_means": self.feature_means.tolist(),
                "feature_stds": self.feature_stds.tolist(),
                "training_row_ids": list(self.training_row_ids),
                "cv_rmse": {repr(k): v for k, v in self.cv_rmse.items()}}

    @classmethod
    def from_dict(cls, obj: dict) -> MetaLearner:
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"meta-learner schema_version {obj.get('schema_version')} "
                             f"!= {SCHEMA_VERSION}")
        return cls(np.array(obj["weights"]), float(obj["bias"]), float(obj["alpha"]),
                   np.array(obj["feature_means"]), np.array(obj["feature_stds"]),
                   tuple(obj.get("training_row_ids", ())),
                   {float(k): v for k, v in obj.get("cv_rmse", {}).items()})

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> MetaLearner:
        return cls.from_dict(json.loads(Path(path).read_text()))


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    return means, np.where(stds > 1e-12, stds, 1.0)


def ridge_solve(Xs: np.ndarray, y: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Closed-form ridge on standardized ``Xs``; the intercept is the target mean
    and is not penalized."""
    ybar = float(y.mean())
    A = Xs.T @ Xs + alpha * np.eye(Xs.shape[1])
    w = cho_solve(cho_factor(A), Xs.T @ (y - ybar))
    return w, ybar


def group_folds(groups, folds: int, seed: int) -> tuple[np.ndarray, int]:
    """Fold id per row such that all rows of a group share one fold."""
    uniq = sorted(set(groups))
    if len(uniq) < folds:
        log.debug("only %d distinct datasets; reducing CV folds from %d", len(uniq), folds)
        folds = len(uniq)
    order = rng(seed, "meta-folds").permutation(len(uniq))
    fold_of_group = {uniq[g]: k % folds for k, g in enumerate(order)}
    return np.array([fold_of_group[g] for g in groups]), folds


def cv_rmse(X, y, groups, alpha: float, folds: int, seed: int) -> float:
    fold_of, folds = group_folds(groups, folds, seed)
    sq = np.empty(y.size)
    for f in range(folds):
        tr, va = fold_of != f, fold_of == f
        mu, sd = standardization(X[tr])
        w, b = ridge_solve((X[tr] - mu) / sd, y[tr], alpha)
        sq[va] = (np.clip((X[va] - mu) / sd @ w + b, 0.0, 1.0) - y[va]) ** 2
    return math.sqrt(float(sq.mean()))


def fit_arrays(X, y, groups, alpha_grid=DEFAULT_ALPHAS, folds: int = 5, seed: int = 0,
               row_ids=()) -> MetaLearner:
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    if X.shape[0] < 10:
        raise ValueError(f"need at least 10 meta-database rows, got {X.shape[0]}")
    alphas = [float(a) for a in alpha_grid]
    if not alphas or min(alphas) <= 0:
        raise ValueError("alpha_grid must be non-empty with positive values")
    groups = list(groups)
    scores = {}
    if 2 <= len(set(groups)) < folds:
        log.warning("only %d distinct datasets; using that many CV folds", len(set(groups)))
    if len(set(groups)) >= 2:
        scores = {a: cv_rmse(X, y, groups, a, folds, seed) for a in alphas}
        # ties go to the stronger penalty
        best = min(scores.values())
        alpha = max(a for a, s in scores.items() if s <= best * (1 + 1e-12))
    else:
        log.warning("a single dataset cannot be cross-validated; using alpha=%g", max(alphas))
        alpha = max(alphas)
    mu, sd = standardization(X)
    w, b = ridge_solve((X - mu) / sd, y, alpha)
    return MetaLearner(w, b, alpha, mu, sd, tuple(row_ids), scores)


def fit(db: MetaDatabase, alpha_grid=DEFAULT_ALPHAS, folds: int = 5,
        seed: int = 0) -> MetaLearner:
    return fit_arrays(db.features(), db.targets(), db.dataset_ids(), alpha_grid, folds, seed,
                      [r.row_id for r in db.rows])


def predict_clean_acc(ml: MetaLearner, cmv) -> float:
    values = cmv.values if isinstance(cmv, CMVector) else np.asarray(cmv, float)
    if values.shape != ml.weights.shape:
        raise ValueError(f"expected {ml.weights.size} measures, got {values.size}")
    return float(ml.predict(values[None, :])[0])


def normal_equation_residual(ml: MetaLearner, X, y) -> float:
    Xs = ml.standardize(X)
    y = np.asarray(y, float)
    lhs = (Xs.T @ Xs + ml.alpha * np.eye(Xs.shape[1])) @ ml.weights
    return float(np.max(np.abs(lhs - Xs.T @ (y - y.mean()))))
