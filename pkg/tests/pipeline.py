"""Desk-scale experiment pipelines shared by the acceptance suite and the slow
detector checks. Every builder is cached so one pytest session pays once."""
import functools
import time

import numpy as np

from flipdetect import metadb, metalearner
from flipdetect.data import synth_by_difficulty
from flipdetect.evaluation import baseline_scores, diva_scores, lodo_rmse
from flipdetect.metadb import MetaDatabase

LEVELS = ("easy", "normal", "hard")
RATES = metadb.DEFAULT_RATES
HEATMAP_RATES = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
TRAIN_VARIANTS = ("clean", "sln", "falfa")

REPORT = []


def record(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    REPORT.append(line)
    print(line)
    return ok


def timed(fn):
    @functools.wraps(fn)
    def wrapper(*a, **k):
        t = time.perf_counter()
        out = fn(*a, **k)
        print(f"[{fn.__name__}] {time.perf_counter() - t:.1f}s")
        return out
    return wrapper


def graded(count, seed):
    return [ds for lv in LEVELS for ds in synth_by_difficulty(lv, count, seed)]


@functools.lru_cache(maxsize=None)
@timed
def lodo_experiment():
    """15 datasets (5 per difficulty); SLN+FALFA train, ALFA held back."""
    datasets = graded(5, seed=7)
    result, db = lodo_rmse(datasets, ("sln", "falfa", "alfa"), RATES)
    return datasets, result, db


@functools.lru_cache(maxsize=None)
@timed
def frozen_detector():
    """Meta-learner for the frozen-threshold experiments: the LODO datasets
    plus 10 more per difficulty, trained on SLN and FALFA rows only."""
    _, _, db = lodo_experiment()
    extra = metadb.build(graded(10, seed=23), RATES, attacks=metadb.TRAINING_ATTACKS)
    rows = [r for r in db.rows if r.variant in TRAIN_VARIANTS] + extra.rows
    return metalearner.fit(MetaDatabase(rows))


@functools.lru_cache(maxsize=None)
@timed
def heatmap_pools(n_easy=25, n_clean=20):
    """Fresh datasets: Easy ones at every FALFA rate, clean Normal and Hard ones."""
    easy = synth_by_difficulty("easy", n_easy, seed=11)
    normal = synth_by_difficulty("normal", n_clean, seed=11)
    hard = synth_by_difficulty("hard", n_clean, seed=11)
    sources = {ds.name: ds for ds in easy + normal + hard}
    easy_db = metadb.build(easy, HEATMAP_RATES, attacks=("falfa",), empirical=True)
    clean_db = metadb.build(normal + hard, (), attacks=(), empirical=True)
    return sources, easy_db.rows + clean_db.rows


@functools.lru_cache(maxsize=None)
def heatmap_scores():
    sources, rows = heatmap_pools()
    ml = frozen_detector()
    return sources, rows, diva_scores(rows, ml), baseline_scores(rows, sources)


def level_of(row):
    return row.dataset_id.split("-", 1)[0]


def tpr_inversions(tprs):
    """Drops between consecutive rates of a TPR sequence."""
    return [float(a - b) for a, b in zip(tprs, tprs[1:]) if b < a]


def median_inversions(values):
    return [float(a - b) for a, b in zip(values, values[1:]) if b < a]


def summary(values):
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


@functools.lru_cache(maxsize=None)
@timed
def attack_behavior(n=10):
    datasets = synth_by_difficulty("easy", n, seed=31)
    return metadb.build(datasets, (0.30,), attacks=("sln", "falfa"))


def mean(x):
    return float(np.mean(x))
