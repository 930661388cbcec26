"""Victim and surrogate classifiers written directly in numpy.

* ``MLPModel``: d -> 128 -> 128 -> 1 ReLU network, sigmoid output, trained by
  minibatch SGD on binary cross-entropy.
* ``LinearModel``: hinge (or logistic) loss with an L2 penalty, minibatch SGD.
* ``RFFModel``: random Fourier cosine features feeding a ``LinearModel``; a
  cheap stand-in for an RBF-kernel SVM.

All training is deterministic given the data and ``TrainConfig.seed``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import expit

from ._seeding import rng
from .data import Dataset, Normalizer, ValidationError

log = logging.getLogger(__name__)

HIDDEN = 128


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    learning_rate: float = 0.01
    batch_size: int = 128
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def _check_dim(model, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.dim:
        raise ValueError(f"model expects {model.dim} features, got {X.shape[1]}")
    return X


def _minibatches(n: int, batch_size: int, gen: np.random.Generator):
    order = gen.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


# ----------------------------------------------------------------- linear

@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float
    loss_kind: str = "hinge"
    history: tuple = field(default=(), compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def decision_function(self, X) -> np.ndarray:
        X = _check_dim(self, X)
        return X @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


def _linear_loss_grad(w, b, X, s, kind):
    """Mean loss and gradient for signed targets ``s`` in {-1, +1}."""
    m = s * (X @ w + b)
    if kind == "hinge":
        loss = np.maximum(0.0, 1.0 - m)
        coef = -(m < 1.0).astype(float) * s
    else:
        loss = np.logaddexp(0.0, -m)
        coef = -s * expit(-m)
    n = X.shape[0]
    return loss.mean(), X.T @ coef / n, coef.sum() / n


def linear_objective(model: LinearModel, X, y, l2: float) -> float:
    s = 2.0 * np.asarray(y) - 1.0
    loss, _, _ = _linear_loss_grad(model.weights, model.bias, np.asarray(X, float), s,
                                   model.loss_kind)
    return loss + 0.5 * l2 * float(model.weights @ model.weights)


def fit_linear(X: np.ndarray, y: np.ndarray, cfg: TrainConfig, loss_kind: str = "hinge",
               sample_weight: np.ndarray | None = None) -> LinearModel:
    """Minibatch SGD with a proximal L2 step, which stays stable for any ``l2``."""
    if loss_kind not in ("hinge", "logistic"):
        raise ValueError(f"unknown loss {loss_kind!r}")
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    w = np.zeros(d)
    b = 0.0
    gen = rng(cfg.seed, "linear")
    lr, lam = cfg.learning_rate, cfg.l2
    history = []
    for epoch in range(cfg.epochs):
        for idx in _minibatches(n, cfg.batch_size, gen):
            _, gw, gb = _linear_loss_grad(w, b, X[idx], s[idx], loss_kind)
            w = (w - lr * gw) / (1.0 + lr * lam)
            b -= lr * gb
        obj = _linear_loss_grad(w, b, X, s, loss_kind)[0] + 0.5 * lam * float(w @ w)
        if not np.isfinite(obj):
            raise TrainingError(f"linear model diverged at epoch {epoch + 1}")
        history.append(obj)
    return LinearModel(w, float(b), loss_kind, tuple(history))


def train_linear(train: Dataset, cfg: TrainConfig = TrainConfig(),
                 loss_kind: str = "hinge") -> LinearModel:
    train.require_both_classes()
    return fit_linear(train.features, train.labels, cfg, loss_kind)


# -------------------------------------------------- random Fourier features

RFF_COMPONENTS = 256
# inner margin-classifier settings; the unit-norm cosine features need a
# much larger step than the MLP
RFF_INNER = dict(epochs=300, learning_rate=0.5, batch_size=64, l2=1e-4)


@dataclass(frozen=True)
class RFFModel:
    projection: np.ndarray  # d x m
    offsets: np.ndarray  # m
    bandwidth: float
    inner: LinearModel
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.projection.shape[0]

    def transform(self, X) -> np.ndarray:
        X = _check_dim(self, X)
        m = self.projection.shape[1]
        return np.sqrt(2.0 / m) * np.cos(X @ self.projection + self.offsets)

    def decision_function(self, X) -> np.ndarray:
        return self.inner.decision_function(self.transform(X))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


def median_bandwidth(X: np.ndarray) -> float:
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 points to estimate a bandwidth")
    dist = pdist(X)
    bw = float(np.median(dist))
    return bw if bw > 0 else 1.0


def train_rff(train: Dataset, cfg: TrainConfig = TrainConfig(),
              n_components: int = RFF_COMPONENTS, bandwidth: float | None = None) -> RFFModel:
    train.require_both_classes()
    X = train.features
    bw = median_bandwidth(X) if bandwidth is None else float(bandwidth)
    gen = rng(cfg.seed, "rff-projection")
    P = gen.standard_normal((X.shape[1], n_components)) / bw
    off = gen.uniform(0.0, 2.0 * np.pi, n_components)
    shell = RFFModel(P, off, bw, LinearModel(np.zeros(n_components), 0.0), cfg.seed)
    inner_cfg = TrainConfig(seed=cfg.seed, **RFF_INNER)
    inner = fit_linear(shell.transform(X), train.labels, inner_cfg, "hinge")
    return replace(shell, inner=inner)


# -------------------------------------------------------------------- MLP

@dataclass(frozen=True)
class MLPModel:
    """Parameters ordered (W1, b1, W2, b2, W3, b3)."""

    params: tuple
    history: tuple = field(default=(), compare=False, repr=False)

    @property
    def dim(self) -> int:
        return self.params[0].shape[0]

    def logits(self, X) -> np.ndarray:
        X = _check_dim(self, X)
        return _forward(self.params, X)[-1]

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.logits(X))

    def decision_function(self, X) -> np.ndarray:
        return self.logits(X)

    def predict(self, X) -> np.ndarray:
        return (self.logits(X) > 0).astype(np.int64)


def init_mlp(d: int, seed: int, hidden: int = HIDDEN) -> tuple:
    gen = rng(seed, "mlp-init")
    W1 = gen.standard_normal((d, hidden)) * np.sqrt(2.0 / d)
    W2 = gen.standard_normal((hidden, hidden)) * np.sqrt(2.0 / hidden)
    W3 = gen.standard_normal((hidden, 1)) * np.sqrt(1.0 / hidden)
    return (W1, np.zeros(hidden), W2, np.zeros(hidden), W3, np.zeros(1))


def _forward(params, X):
    W1, b1, W2, b2, W3, b3 = params
    a1 = X @ W1 + b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ W2 + b2
    h2 = np.maximum(a2, 0.0)
    z = (h2 @ W3 + b3)[:, 0]
    return a1, h1, a2, h2, z


def mlp_loss_and_grads(params, X: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean binary cross-entropy (plus ``l2/2 * |W|^2``) and its gradients."""
    W1, b1, W2, b2, W3, b3 = params
    a1, h1, a2, h2, z = _forward(params, X)
    n = X.shape[0]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    dz = (expit(z) - y)[:, None] / n
    gW3 = h2.T @ dz
    gb3 = dz.sum(axis=0)
    da2 = (dz @ W3.T) * (a2 > 0)
    gW2 = h1.T @ da2
    gb2 = da2.sum(axis=0)
    da1 = (da2 @ W2.T) * (a1 > 0)
    gW1 = X.T @ da1
    gb1 = da1.sum(axis=0)
    if l2:
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in (W1, W2, W3))
        gW1 = gW1 + l2 * W1
        gW2 = gW2 + l2 * W2
        gW3 = gW3 + l2 * W3
    return loss, (gW1, gb1, gW2, gb2, gW3, gb3)


EARLY_STOP_WINDOW = 20
EARLY_STOP_TOL = 1e-5


def fit_mlp(X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> MLPModel:
    """Minibatch SGD; the recorded epoch loss is the size-weighted mean of the
    minibatch losses seen during that epoch. Training runs in float32."""
    X = np.asarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=np.float32)
    n = X.shape[0]
    params = [p.astype(np.float32) for p in init_mlp(X.shape[1], cfg.seed)]
    lr = np.float32(cfg.learning_rate)
    gen = rng(cfg.seed, "mlp-batches")
    history = []
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in _minibatches(n, cfg.batch_size, gen):
            loss, grads = mlp_loss_and_grads(params, X[idx], y[idx], cfg.l2)
            total += loss * idx.size
            for p, g in zip(params, grads):
                p -= lr * g
        loss = total / n
        if not np.isfinite(loss):
            raise TrainingError(f"MLP loss became {loss} at epoch {epoch + 1}")
        history.append(loss)
        if (epoch >= EARLY_STOP_WINDOW
                and history[-EARLY_STOP_WINDOW - 1] - loss < EARLY_STOP_TOL):
            break
    return MLPModel(tuple(p.astype(np.float64) for p in params), tuple(history))


def train_mlp(train: Dataset, cfg: TrainConfig = TrainConfig()) -> MLPModel:
    train.require_both_classes()
    return fit_mlp(train.features, train.labels, cfg)


# -------------------------------------------------------------------- kNN

def knn_predict(train: Dataset, query, k: int) -> np.ndarray:
    """Majority vote among the ``k`` nearest training points (Euclidean).

    Distance ties go to the lower training index and vote ties to label 0.
    """
    if train.n == 0:
        raise ValidationError("empty training set")
    if not 1 <= k <= train.n:
        raise ValueError(f"k must be in [1, {train.n}], got {k}")
    Q = np.asarray(query, dtype=float)
    if Q.ndim == 1:
        Q = Q[None, :]
    D = cdist(Q, train.features)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    ones = train.labels[nn].sum(axis=1)
    return (2 * ones > k).astype(np.int64)


# ------------------------------------------------------------- evaluation

def accuracy(model, ds: Dataset) -> float:
    return float(np.mean(model.predict(ds.features) == ds.labels))


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold id per example; each class is dealt round-robin after a shuffle."""
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    gen = rng(seed, "folds")
    fold_of = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if idx.size < folds:
            raise ValidationError(
                f"class {c} has {idx.size} examples, fewer than {folds} folds")
        idx = gen.permutation(idx)
        fold_of[idx] = (np.arange(idx.size) + offset) % folds
        offset += idx.size
    return fold_of


def cross_val_accuracy(ds: Dataset, folds: int = 5, cfg: TrainConfig = TrainConfig()) -> float:
    """Mean held-out accuracy of the MLP over stratified folds.

    Each fold is z-scored with statistics of its own training part.
    """
    fold_of = stratified_folds(ds.labels, folds, cfg.seed)
    accs = []
    for f in range(folds):
        tr, te = fold_of != f, fold_of == f
        norm = Normalizer.fit(ds.features[tr])
        model = fit_mlp(norm.transform(ds.features[tr]), ds.labels[tr],
                        replace(cfg, seed=cfg.seed + f))
        accs.append(np.mean(model.predict(norm.transform(ds.features[te])) == ds.labels[te]))
    return float(np.mean(accs))


# ---------------------------------------------------------- serialization

def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, float).ravel().tolist()}


def _unarr(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=float).reshape(obj["shape"])


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {"kind": "linear", "loss_kind": model.loss_kind,
                "weights": _arr(model.weights), "bias": model.bias}
    if isinstance(model, RFFModel):
        return {"kind": "rff", "projection": _arr(model.projection),
                "offsets": _arr(model.offsets), "bandwidth": model.bandwidth,
                "seed": model.seed, "inner": model_to_dict(model.inner)}
    if isinstance(model, MLPModel):
        names = ("W1", "b1", "W2", "b2", "W3", "b3")
        return {"kind": "mlp", **{k: _arr(p) for k, p in zip(names, model.params)}}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "linear":
        return LinearModel(_unarr(obj["weights"]), float(obj["bias"]), obj["loss_kind"])
    if kind == "rff":
        return RFFModel(_unarr(obj["projection"]), _unarr(obj["offsets"]),
                        float(obj["bandwidth"]), model_from_dict(obj["inner"]),
                        int(obj["seed"]))
    if kind == "mlp":
        return MLPModel(tuple(_unarr(obj[k]) for k in ("W1", "b1", "W2", "b2", "W3", "b3")))
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
