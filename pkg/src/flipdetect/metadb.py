"""Meta-database of (complexity measures -> clean test accuracy) rows.

Each source dataset is split 80/20 once per seed. Its training part is
poisoned at every requested (attack, rate); an MLP victim is trained on
every variant and scored on the untouched test part, and the complexity
measures are taken from the variant's training part only.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._seeding import derive_seed
from .attacks import run_attack
from .classifiers import TrainConfig, accuracy, cross_val_accuracy, fit_mlp
from .cmeasures import CMVector, extract, measure_names
from .data import Dataset, Normalizer, SchemaError, train_test_split

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PROVENANCE = ("dataset_id", "variant", "rate", "seed")
TARGETS = ("acc_clean", "acc_train_poisoned")
DEFAULT_RATES = (0.05, 0.10, 0.20, 0.30)
TRAINING_ATTACKS = ("sln", "falfa")
MAX_FAILED_SHARE = 0.20


class BuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetaRow:
    dataset_id: str
    variant: str
    rate: float
    seed: int
    cmv: CMVector
    acc_clean: float
    acc_train_poisoned: float
    # CV accuracy on the variant's training part; only filled on request and
    # never written to disk
    acc_empirical: float | None = field(default=None, compare=False)
    train_idx: tuple = field(default=(), compare=False, repr=False)
    test_idx: tuple = field(default=(), compare=False, repr=False)
    train_labels: tuple = field(default=(), compare=False, repr=False)

    @property
    def key(self) -> tuple:
        return (self.dataset_id, self.variant, self.rate, self.seed)

    @property
    def row_id(self) -> str:
        return f"{self.dataset_id}|{self.variant}|{self.rate!r}|{self.seed}"


@dataclass
class MetaDatabase:
    rows: list
    schema_version: int = SCHEMA_VERSION
    build_config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def features(self) -> np.ndarray:
        return np.array([r.cmv.values for r in self.rows]).reshape(len(self.rows), -1)

    def targets(self) -> np.ndarray:
        return np.array([r.acc_clean for r in self.rows])

    def dataset_ids(self) -> list:
        return [r.dataset_id for r in self.rows]

    def select(self, predicate) -> MetaDatabase:
        return MetaDatabase([r for r in self.rows if predicate(r)], self.schema_version,
                            dict(self.build_config))

    def validate(self):
        keys = [r.key for r in self.rows]
        if len(set(keys)) != len(keys):
            raise SchemaError("duplicate (dataset_id, variant, rate, seed) keys")
        ids = {r.dataset_id for r in self.rows}
        clean = {r.dataset_id for r in self.rows if r.variant == "clean"}
        if ids - clean:
            raise SchemaError(f"datasets without a clean row: {sorted(ids - clean)}")


def _sort_key(row: MetaRow):
    return (row.dataset_id, row.seed, row.variant != "clean", row.variant, row.rate)


def dataset_rows(ds: Dataset, seed: int, attacks, rates, cfg: TrainConfig,
                 empirical: bool = False) -> tuple[list, list]:
    """All variant rows of one dataset for one split seed.

    Returns ``(rows, failures)``; a failing variant is logged and skipped.
    """
    split = train_test_split(ds, 0.8, derive_seed(seed, "split", ds.name))
    jobs = [("clean", 0.0)] + [(a, float(r)) for a in attacks for r in rates]
    rows, failures = [], []
    for variant, rate in jobs:
        try:
            rows.append(_variant_row(ds.name, split, variant, rate, seed, cfg, empirical))
        except Exception as exc:  # noqa: BLE001 - one bad variant must not stop a batch build
            log.warning("%s %s@%.2f failed: %s", ds.name, variant, rate, exc)
            failures.append((ds.name, variant, rate, seed, repr(exc)))
    return rows, failures


def _variant_row(name, split, variant, rate, seed, cfg, empirical) -> MetaRow:
    vseed = derive_seed(seed, name, variant, repr(rate))
    if variant == "clean":
        train = split.train
    else:
        train = run_attack(variant, split.train, rate, seed=vseed,
                           cfg=replace(cfg, seed=vseed)).poisoned
    norm = Normalizer.fit(train.features)
    victim = fit_mlp(norm.transform(train.features), train.labels,
                     replace(cfg, seed=derive_seed(vseed, "victim")))
    acc_clean = accuracy(victim, norm.apply(split.test))
    acc_train = accuracy(victim, norm.apply(train))
    cmv = extract(train, seed)
    acc_emp = None
    if empirical:
        acc_emp = cross_val_accuracy(train, 5, replace(cfg, seed=derive_seed(vseed, "cv")))
    return MetaRow(name, variant, rate, seed, cmv, acc_clean, acc_train, acc_emp,
                   tuple(split.train_idx.tolist()), tuple(split.test_idx.tolist()),
                   tuple(train.labels.tolist()))


def row_training_set(row: MetaRow, source: Dataset) -> Dataset:
    """Rebuild the (possibly poisoned) training part a row was computed from."""
    train = source.subset(np.array(row.train_idx, dtype=np.int64))
    return train.with_labels(np.array(row.train_labels, dtype=np.int64),
                             attack=row.variant, rate=row.rate)


def build(datasets, rates=DEFAULT_RATES, seeds=(0,), cfg: TrainConfig = TrainConfig(),
          attacks=TRAINING_ATTACKS, threads: int = 1, empirical: bool = False) -> MetaDatabase:
    """Build the meta-database; work items are (dataset, seed) pairs.

    Output order is canonical, so any ``threads`` value gives the same rows.
    """
    names = [ds.name for ds in datasets]
    if len(set(names)) != len(names):
        raise ValueError("dataset names must be unique; they become dataset_id")
    items = [(ds, s) for ds in datasets for s in seeds]

    def work(item):
        ds, s = item
        return dataset_rows(ds, s, attacks, rates, cfg, empirical)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]
    rows = [r for rs, _ in results for r in rs]
    failures = [f for _, fs in results for f in fs]
    total = len(rows) + len(failures)
    if total and len(failures) / total > MAX_FAILED_SHARE:
        raise BuildError(f"{len(failures)} of {total} rows failed; first: {failures[0]}")
    rows.sort(key=_sort_key)
    config = {"rates": [float(r) for r in rates], "attacks": list(attacks),
              "seeds": [int(s) for s in seeds], "datasets": names,
              "train_config": cfg.__dict__.copy(), "failures": failures}
    db = MetaDatabase(rows, SCHEMA_VERSION, config)
    db.validate()
    return db


# ------------------------------------------------------------------ I/O

def columns() -> list[str]:
    return list(PROVENANCE) + measure_names() + list(TARGETS)


def _config_path(path: Path) -> Path:
    return path.with_name(path.stem + ".config.json")


def save(db: MetaDatabase, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# schema_version={db.schema_version}", ",".join(columns())]
    for r in db.rows:
        vals = [r.dataset_id, r.variant, repr(float(r.rate)), str(int(r.seed))]
        vals += [repr(float(v)) for v in r.cmv.values]
        vals += [repr(float(r.acc_clean)), repr(float(r.acc_train_poisoned))]
        lines.append(",".join(vals))
    path.write_text("\n".join(lines) + "\n")
    _config_path(path).write_text(json.dumps(db.build_config, indent=2, sort_keys=True) + "\n")


def load(path) -> MetaDatabase:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# schema_version="):
        raise SchemaError(f"{path}: missing schema_version line")
    version = int(lines[0].split("=", 1)[1])
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema_version {version}, expected {SCHEMA_VERSION}")
    header = lines[1].split(",") if len(lines) > 1 else []
    if header != columns():
        missing = [c for c in columns() if c not in header]
        raise SchemaError(f"{path}: bad header; missing columns {missing}")
    nm = len(measure_names())
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        v = line.split(",")
        if len(v) != len(header):
            raise SchemaError(f"{path}: line {lineno} has {len(v)} fields")
        cmv = CMVector(np.array([float(x) for x in v[4:4 + nm]]))
        rows.append(MetaRow(v[0], v[1], float(v[2]), int(v[3]), cmv,
                            float(v[4 + nm]), float(v[5 + nm])))
    cfg_path = _config_path(path)
    config = json.loads(cfg_path.read_text()) if cfg_path.exists() else {}
    db = MetaDatabase(rows, version, config)
    db.validate()
    return db


def expected_row_count(n_datasets: int, n_rates: int, n_attacks: int = 2, n_seeds: int = 1) -> int:
    return n_datasets * n_seeds * (1 + n_attacks * n_rates)

