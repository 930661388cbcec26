"""Evaluation protocol: leave-one-dataset-out regression error, ROC curves,
TNR/TPR heatmaps under a frozen threshold, and a kNN-relabeling baseline."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import metadb as metadb_mod
from . import metalearner
from .classifiers import TrainConfig
from .data import Dataset, Normalizer
from .detector import calibrate_threshold_tnr
from .metadb import MetaDatabase, MetaRow

EVAL_ATTACKS = ("sln", "falfa", "alfa")


def rmse(pred, target) -> float:
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    return math.sqrt(float(np.mean((pred - target) ** 2)))


# ------------------------------------------------------------------ LODO

@dataclass(frozen=True)
class LodoPrediction:
    row: MetaRow
    acc_estimated: float

    @property
    def score(self) -> float:
        """Empirical minus estimated accuracy; needs rows built with ``empirical=True``."""
        if self.row.acc_empirical is None:
            raise ValueError("row has no empirical accuracy")
        return self.row.acc_empirical - self.acc_estimated


@dataclass
class LodoResult:
    predictions: list
    learners: dict  # held-out dataset_id -> MetaLearner
    attacks: tuple

    def table(self) -> dict:
        """dataset_id -> attack -> RMSE over that attack's poisoned rows."""
        by = defaultdict(lambda: defaultdict(list))
        for p in self.predictions:
            by[p.row.dataset_id][p.row.variant].append((p.acc_estimated, p.row.acc_clean))
        out = {}
        for ds_id in sorted(by):
            out[ds_id] = {}
            for attack in self.attacks:
                pairs = by[ds_id].get(attack)
                out[ds_id][attack] = rmse(*zip(*pairs)) if pairs else float("nan")
        return out

    def mean_rmse(self, attack: str, dataset_ids=None) -> float:
        table = self.table()
        ids = dataset_ids if dataset_ids is not None else list(table)
        return float(np.nanmean([table[i][attack] for i in ids]))

    def select(self, dataset_ids=None, variants=None, rates=None) -> list:
        out = []
        for p in self.predictions:
            if dataset_ids is not None and p.row.dataset_id not in dataset_ids:
                continue
            if variants is not None and p.row.variant not in variants:
                continue
            if rates is not None and p.row.variant != "clean" and not any(
                    math.isclose(p.row.rate, r) for r in rates):
                continue
            out.append(p)
        return out


def lodo(db: MetaDatabase, train_variants=("clean", "sln", "falfa"),
         eval_attacks=EVAL_ATTACKS, alpha_grid=metalearner.DEFAULT_ALPHAS,
         folds: int = 5, seed: int = 0) -> LodoResult:
    """Hold out each dataset in turn; fit on the others' training-variant rows only."""
    ids = sorted({r.dataset_id for r in db.rows})
    if len(ids) < 3:
        raise ValueError(f"leave-one-dataset-out needs >= 3 datasets, got {len(ids)}")
    preds, learners = [], {}
    for held in ids:
        train = db.select(lambda r: r.dataset_id != held and r.variant in train_variants)
        ml = metalearner.fit(train, alpha_grid, folds, seed)
        learners[held] = ml
        test_rows = [r for r in db.rows if r.dataset_id == held]
        est = ml.predict(np.array([r.cmv.values for r in test_rows]))
        preds += [LodoPrediction(r, float(e)) for r, e in zip(test_rows, est)]
    return LodoResult(preds, learners, tuple(eval_attacks))


def lodo_rmse(datasets, attacks_eval=EVAL_ATTACKS, rates=metadb_mod.DEFAULT_RATES,
              cfg: TrainConfig = TrainConfig(), seeds=(0,), threads: int = 1,
              empirical: bool = True) -> tuple[LodoResult, MetaDatabase]:
    """Build every variant of every dataset once, then run the LODO loop on it."""
    attacks = tuple(dict.fromkeys(("sln", "falfa") + tuple(attacks_eval)))
    db = metadb_mod.build(datasets, rates, seeds, cfg, attacks, threads, empirical)
    return lodo(db, eval_attacks=tuple(attacks_eval)), db


def leakage_report(result: LodoResult) -> dict:
    """Counts that must all be zero: held-out rows used in training, and
    train/test index overlap inside any row's split."""
    leaked = 0
    for held, ml in result.learners.items():
        leaked += sum(rid.split("|", 1)[0] == held for rid in ml.training_row_ids)
    overlap = sum(len(set(p.row.train_idx) & set(p.row.test_idx)) for p in result.predictions)
    return {"dataset_id_leaks": leaked, "split_overlap": overlap}


# ------------------------------------------------------------------- ROC

@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # ascending; the last one is +inf
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """Flag ``score >= t`` as poisoned and sweep ``t`` over all distinct scores."""
    s = np.asarray(scores, dtype=float)
    lab = np.asarray(labels).astype(bool)
    if lab.all() or not lab.any():
        raise ValueError("ROC needs both poisoned and clean examples")
    thr = np.append(np.unique(s), np.inf)
    flagged = s[None, :] >= thr[:, None]
    tpr = flagged[:, lab].mean(axis=1)
    fpr = flagged[:, ~lab].mean(axis=1)
    # fpr falls as the threshold rises; integrate left to right
    x, y = fpr[::-1], tpr[::-1]
    auc = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    return RocCurve(thr, tpr, fpr, auc)


def save_roc(curve: RocCurve, path, summary: dict | None = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["threshold,fpr,tpr"]
    lines += [f"{t!r},{f!r},{p!r}" for t, f, p in
              zip(curve.thresholds.tolist(), curve.fpr.tolist(), curve.tpr.tolist())]
    path.write_text("\n".join(lines) + "\n")
    info = {"auc": curve.auc, **(summary or {})}
    path.with_name(path.stem + ".summary.json").write_text(
        json.dumps(info, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------- heatmap

@dataclass
class HeatmapGrid:
    row_axis: list
    col_axis: list  # rates; 0.0 is the "Clean" column
    cells: np.ndarray  # NaN marks a cell without datasets
    counts: np.ndarray
    detector_name: str
    threshold: float

    def cell(self, row, rate) -> float:
        return float(self.cells[self.row_axis.index(row), _col(self.col_axis, rate)])


def _col(axis, rate) -> int:
    for k, r in enumerate(axis):
        if math.isclose(r, rate, abs_tol=1e-12):
            return k
    raise KeyError(rate)


def heatmap(scores: dict, rows, rates, threshold: float, detector_name: str) -> HeatmapGrid:
    """``scores[(row, rate)]`` holds detector scores of the datasets in that cell.

    Rate 0 cells report TNR (share with score <= threshold), all others TPR
    (share with score > threshold).
    """
    rows = list(rows)
    cols = [0.0] + [float(r) for r in rates if r > 0]
    cells = np.full((len(rows), len(cols)), np.nan)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for (row, rate), vals in scores.items():
        if row not in rows:
            continue
        i, j = rows.index(row), _col(cols, rate)
        v = np.asarray(vals, dtype=float)
        counts[i, j] = v.size
        if v.size:
            flagged = np.mean(v > threshold)
            cells[i, j] = 1.0 - flagged if j == 0 else flagged
    return HeatmapGrid(rows, cols, cells, counts, detector_name, float(threshold))


def save_heatmap(grid: HeatmapGrid, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    head = ["# detector=" + grid.detector_name, f"# threshold={grid.threshold!r}",
            "# rows=" + ";".join(map(str, grid.row_axis)),
            "# columns: clean column is TNR, rate columns are TPR",
            "row," + ",".join("clean" if c == 0 else repr(c) for c in grid.col_axis)]
    body = []
    for name, vals, cnt in zip(grid.row_axis, grid.cells, grid.counts):
        cells = ["" if np.isnan(v) else f"{v!r}" for v in vals.tolist()]
        body.append(f"{name}," + ",".join(cells))
    body.append("# counts")
    for name, cnt in zip(grid.row_axis, grid.counts):
        body.append(f"# {name}," + ",".join(map(str, cnt.tolist())))
    path.write_text("\n".join(head + body) + "\n")


def save_rmse_table(result: LodoResult, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = result.table()
    lines = ["dataset_id," + ",".join(result.attacks)]
    for ds_id, row in table.items():
        lines.append(ds_id + "," + ",".join(repr(row[a]) for a in result.attacks))
    lines.append("mean," + ",".join(repr(result.mean_rmse(a)) for a in result.attacks))
    path.write_text("\n".join(lines) + "\n")


# ------------------------------------------------------- kNN baseline

@dataclass(frozen=True)
class KnnDefenseResult:
    relabel_fraction: float
    poisoned: bool | None
    sanitized_labels: np.ndarray = field(repr=False, default=None)


def knn_relabel(ds: Dataset, k: int = 10, eta: float = 0.6) -> np.ndarray:
    """Relabel each point whose k nearest neighbours (itself excluded) agree
    with frequency >= eta on the other label. Distances use z-scored features."""
    if not 1 <= k < ds.n:
        raise ValueError(f"k must be in [1, n) = [1, {ds.n}), got {k}")
    X = Normalizer.fit(ds.features).transform(ds.features)
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    ones = ds.labels[nn].sum(axis=1)
    majority = (2 * ones > k).astype(np.int64)
    share = np.maximum(ones, k - ones) / k
    relabel = (share >= eta) & (majority != ds.labels)
    out = ds.labels.copy()
    out[relabel] = majority[relabel]
    return out


def baseline_knn_defense(ds: Dataset, k: int = 10, eta: float = 0.6,
                         dataset_threshold: float | None = None) -> KnnDefenseResult:
    sanitized = knn_relabel(ds, k, eta)
    frac = float(np.mean(sanitized != ds.labels))
    flag = None if dataset_threshold is None else frac > dataset_threshold
    return KnnDefenseResult(frac, flag, sanitized)


# ------------------------------------------------------------ helpers

def diva_scores(rows, ml: metalearner.MetaLearner) -> np.ndarray:
    est = ml.predict(np.array([r.cmv.values for r in rows]))
    return np.array([r.acc_empirical for r in rows]) - est


def baseline_scores(rows, sources: dict, k: int = 10, eta: float = 0.6) -> np.ndarray:
    return np.array([baseline_knn_defense(metadb_mod.row_training_set(r, sources[r.dataset_id]),
                                          k, eta).relabel_fraction for r in rows])


def calibrate(clean_scores, target_tnr: float = 0.98) -> float:
    return calibrate_threshold_tnr(clean_scores, target_tnr)


# ---------------------------------------------------------- experiments

def group_of(ds: Dataset, by: str = "difficulty") -> str:
    """Heatmap row label of a dataset: its difficulty grade or label-noise rate."""
    if by == "difficulty":
        return str(ds.meta.get("difficulty") or "ungraded")
    if by == "noise":
        return f"{float(ds.meta.get('noise') or 0.0):.2f}"
    raise ValueError(f"unknown grouping {by!r}; choose difficulty or noise")


def calibration_scores(result: LodoResult, sources: dict, k: int = 10,
                       eta: float = 0.6) -> dict:
    """Clean-population scores for both detectors.

    DIVA scores come from the held-out predictions, so no clean set is scored
    by a meta-learner that saw it.
    """
    clean = result.select(variants=("clean",))
    return {"diva": [p.score for p in clean],
            "baseline": baseline_scores([p.row for p in clean], sources, k, eta).tolist(),
            "datasets": [p.row.dataset_id for p in clean]}


def heatmap_experiment(rows, ml, sources: dict, rates, thresholds: dict,
                       by: str = "difficulty", k: int = 10, eta: float = 0.6) -> dict:
    """DIVA and kNN-baseline grids over (group, rate) with frozen thresholds."""
    groups = sorted({group_of(sources[r.dataset_id], by) for r in rows})
    diva = diva_scores(rows, ml)
    base = baseline_scores(rows, sources, k, eta)
    cells_d, cells_b = defaultdict(list), defaultdict(list)
    for r, sd, sb in zip(rows, diva, base):
        key = (group_of(sources[r.dataset_id], by), 0.0 if r.variant == "clean" else r.rate)
        cells_d[key].append(sd)
        cells_b[key].append(sb)
    return {"diva": heatmap(cells_d, groups, rates, thresholds["diva"], "diva"),
            "baseline": heatmap(cells_b, groups, rates, thresholds["baseline"], "knn-baseline")}


@dataclass(frozen=True)
class AttackEffect:
    dataset_id: str
    attack: str
    rate: float
    clean_test_drop: float  # clean variant's test accuracy minus the attacked one's
    train_test_gap: float  # attacked model's accuracy on its training labels minus test


def attack_effects(db: MetaDatabase) -> list:
    clean = {(r.dataset_id, r.seed): r for r in db.rows if r.variant == "clean"}
    out = []
    for r in db.rows:
        if r.variant == "clean":
            continue
        base = clean[(r.dataset_id, r.seed)]
        out.append(AttackEffect(r.dataset_id, r.variant, r.rate, base.acc_clean - r.acc_clean,
                                r.acc_train_poisoned - r.acc_clean))
    return out


def save_attack_effects(effects, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["dataset_id,attack,rate,clean_test_drop,train_test_gap"]
    lines += [f"{e.dataset_id},{e.attack},{e.rate!r},{e.clean_test_drop!r},{e.train_test_gap!r}"
              for e in effects]
    path.write_text("\n".join(lines) + "\n")


def save_scores(result: LodoResult, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["dataset_id,variant,rate,seed,acc_clean,acc_estimated,acc_empirical,score"]
    for p in result.predictions:
        r = p.row
        emp = "" if r.acc_empirical is None else repr(r.acc_empirical)
        score = "" if r.acc_empirical is None else repr(p.score)
        lines.append(f"{r.dataset_id},{r.variant},{r.rate!r},{r.seed},{r.acc_clean!r},"
                     f"{p.acc_estimated!r},{emp},{score}")
    path.write_text("\n".join(lines) + "\n")
