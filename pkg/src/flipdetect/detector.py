"""Dataset-level poisoning verdicts.

The score of a training set is its cross-validated accuracy minus the clean
accuracy the meta-learner expects from its complexity measures. A successful
label-flipping attack keeps the first high while the second drops, so a
score above the threshold flags the set as poisoned.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ._seeding import derive_seed
from .classifiers import TrainConfig, cross_val_accuracy
from .cmeasures import extract
from .data import Dataset
from .metalearner import MetaLearner, predict_clean_acc

log = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_POISONED = 3


def heuristic_threshold(acc_empirical: float, delta: float) -> float:
    """Tolerate a drop of ``delta`` percent of the empirical accuracy."""
    if not 0.0 <= acc_empirical <= 1.0:
        raise ValueError(f"acc_empirical must be in [0, 1], got {acc_empirical}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    return acc_empirical * delta / 100


def calibrate_threshold_tnr(clean_scores, target_tnr: float) -> float:
    """Smallest observed score ``t`` with at least ``target_tnr`` of clean scores ``<= t``."""
    s = np.sort(np.asarray(clean_scores, dtype=float))
    if s.size == 0:
        raise ValueError("no clean scores to calibrate on")
    if not 0.0 < target_tnr <= 1.0:
        raise ValueError(f"target TNR must be in (0, 1], got {target_tnr}")
    if s.size < 10:
        log.warning("calibrating a threshold on only %d clean scores", s.size)
    k = max(1, math.ceil(target_tnr * s.size - 1e-9))
    return float(s[k - 1])


@dataclass(frozen=True)
class Heuristic:
    delta: float = 5.0

    def threshold(self, acc_empirical: float) -> float:
        return heuristic_threshold(acc_empirical, self.delta)

    def describe(self) -> str:
        return f"heuristic(delta={self.delta:g})"


@dataclass(frozen=True)
class CalibratedTNR:
    target: float
    calibration_scores: tuple

    def __post_init__(self):
        if not 0.0 < self.target <= 1.0:
            raise ValueError(f"target TNR must be in (0, 1], got {self.target}")
        object.__setattr__(self, "calibration_scores", tuple(map(float, self.calibration_scores)))

    def threshold(self, acc_empirical: float) -> float:
        return calibrate_threshold_tnr(self.calibration_scores, self.target)

    def describe(self) -> str:
        return f"calibrated-tnr(target={self.target:g}, n={len(self.calibration_scores)})"


def default_policy(calibration_scores=None) -> Heuristic | CalibratedTNR:
    if calibration_scores is not None and len(calibration_scores):
        return CalibratedTNR(0.98, tuple(calibration_scores))
    return Heuristic(5.0)


@dataclass(frozen=True)
class Verdict:
    dataset: str
    acc_empirical: float
    acc_estimated: float
    threshold: float
    policy: str = ""

    @property
    def score(self) -> float:
        return self.acc_empirical - self.acc_estimated

    @property
    def poisoned(self) -> bool:
        return self.score > self.threshold

    @property
    def exit_code(self) -> int:
        return EXIT_POISONED if self.poisoned else EXIT_CLEAN

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "acc_empirical": self.acc_empirical,
                "acc_estimated": self.acc_estimated, "score": self.score,
                "threshold": self.threshold, "policy": self.policy,
                "poisoned": self.poisoned}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def empirical_accuracy(ds: Dataset, cfg: TrainConfig = TrainConfig(), seed: int = 0) -> float:
    return cross_val_accuracy(ds, 5, replace(cfg, seed=derive_seed(seed, "empirical")))


def score_parts(ds: Dataset, ml: MetaLearner, cfg: TrainConfig = TrainConfig(),
                seed: int = 0) -> tuple[float, float]:
    ds.require_both_classes()
    acc_emp = empirical_accuracy(ds, cfg, seed)
    acc_est = predict_clean_acc(ml, extract(ds, seed))
    return acc_emp, acc_est


def detect(ds: Dataset, ml: MetaLearner, policy=Heuristic(), cfg: TrainConfig = TrainConfig(),
           seed: int = 0) -> Verdict:
    acc_emp, acc_est = score_parts(ds, ml, cfg, seed)
    return verdict_from(ds.name, acc_emp, acc_est, policy)


def verdict_from(name: str, acc_empirical: float, acc_estimated: float, policy) -> Verdict:
    return Verdict(name, float(acc_empirical), float(acc_estimated),
                   float(policy.threshold(acc_empirical)), policy.describe())
