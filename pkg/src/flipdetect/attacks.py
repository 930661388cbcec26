"""Label-flipping poison generators.

``sln`` flips uniformly random labels. ``falfa`` and ``alfa`` share an
alternating scheme: fit a surrogate on the current labels, score every
example by how strongly that surrogate prefers the opposite of its original
label, flip the top-scoring ``budget`` examples, and repeat until the flip
set stops changing.

The selection step is the linear program

    max  sum_i delta_i * g_i   s.t.  sum_i delta_i = budget,  0 <= delta_i <= 1

whose constraint matrix is totally unimodular, so sorting gives the exact
integral optimum and no LP solver is needed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ._seeding import derive_seed
from .classifiers import TrainConfig, fit_mlp, train_rff
from .data import Dataset, Normalizer, flip, random_flip_indices

log = logging.getLogger(__name__)

ATTACKS = ("sln", "falfa", "alfa")


@dataclass(frozen=True)
class AttackResult:
    poisoned: Dataset
    flipped_indices: np.ndarray
    rounds_run: int


def flip_budget(n: int, rate: float) -> int:
    if not 0.0 <= rate <= 0.5:
        raise ValueError(f"poisoning rate must be in [0, 0.5], got {rate}")
    return int(np.floor(n * rate + 1e-9))


def _apply(train: Dataset, idx: np.ndarray, attack: str, rate: float,
           rounds_run: int) -> AttackResult:
    idx = np.sort(np.asarray(idx, dtype=np.int64))
    y = train.labels.copy()
    y[idx] = flip(y[idx])
    poisoned = train.with_labels(y, attack=attack, rate=rate)
    return AttackResult(poisoned, idx, rounds_run)


def select_top(scores: np.ndarray, budget: int) -> np.ndarray:
    """Indices of the ``budget`` largest scores; ties go to the lower index."""
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:budget])


def sln(train: Dataset, rate: float, seed: int = 0) -> AttackResult:
    """Stochastic label noise: exactly round(n * rate) uniform flips."""
    idx = random_flip_indices(train.n, rate, derive_seed(seed, "sln"))
    return _apply(train, idx, "sln", rate, 0)


def _alternate(train: Dataset, rate: float, rounds: int, attack: str,
               score: Callable[[np.ndarray, np.ndarray, int], np.ndarray]) -> AttackResult:
    budget = flip_budget(train.n, rate)
    if budget == 0:
        return _apply(train, np.array([], dtype=np.int64), attack, rate, 0)
    train.require_both_classes()
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    X = Normalizer.fit(train.features).transform(train.features)
    y0 = train.labels
    current = y0.copy()
    flips = None
    rounds_run = 0
    for r in range(rounds):
        rounds_run = r + 1
        g = score(X, current, r)
        new = select_top(g, budget)
        if flips is not None and np.array_equal(new, flips):
            break
        flips = new
        current = y0.copy()
        current[flips] = flip(current[flips])
        if np.unique(current).size < 2:
            log.warning("%s: flip set empties a class; keeping previous round", attack)
            break
    log.debug("%s rate=%.2f rounds=%d flips=%d", attack, rate, rounds_run, flips.size)
    return _apply(train, flips, attack, rate, rounds_run)


def falfa(train: Dataset, rate: float, cfg: TrainConfig = TrainConfig(),
          rounds: int = 5) -> AttackResult:
    """Alternating label-flip attack against the MLP.

    Each example is scored by the log-odds the current network assigns to
    the flipped version of its original label, i.e. how much the training
    loss would drop if that label were flipped.
    """
    y0 = train.labels

    def score(X, current, r):
        model = fit_mlp(X, current, replace(cfg, seed=derive_seed(cfg.seed, "falfa", r)))
        z = model.logits(X)
        return (1 - 2 * y0) * z

    return _alternate(train, rate, rounds, "falfa", score)


def alfa(train: Dataset, rate: float, cfg: TrainConfig = TrainConfig(),
         rounds: int = 5) -> AttackResult:
    """Alternating label-flip attack against the random-feature margin classifier.

    The score is the hinge loss under the original label minus the hinge
    loss under the flipped label.
    """
    y0 = train.labels
    s0 = 2.0 * y0 - 1.0

    def score(X, current, r):
        ds = Dataset(X, current, train.name)
        model = train_rff(ds, replace(cfg, seed=derive_seed(cfg.seed, "alfa", r)))
        f = model.decision_function(X)
        return np.maximum(0.0, 1.0 - s0 * f) - np.maximum(0.0, 1.0 + s0 * f)

    return _alternate(train, rate, rounds, "alfa", score)


def run_attack(name: str, train: Dataset, rate: float, seed: int = 0,
               cfg: TrainConfig | None = None, rounds: int = 5) -> AttackResult:
    cfg = cfg or TrainConfig(seed=seed)
    if name == "sln":
        return sln(train, rate, seed)
    if name == "falfa":
        return falfa(train, rate, replace(cfg, seed=seed), rounds)
    if name == "alfa":
        return alfa(train, rate, replace(cfg, seed=seed), rounds)
    raise ValueError(f"unknown attack {name!r}; choose from {', '.join(ATTACKS)}")
