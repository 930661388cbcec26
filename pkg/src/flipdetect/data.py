"""Datasets, CSV I/O, normalization, splitting, synthetic generation and label noise."""
from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._seeding import rng


# smallest dataset accepted at a pipeline entry; split parts may be smaller
MIN_ROWS = 4


class DatasetError(ValueError):
    """Base class for malformed or unusable datasets."""


class SchemaError(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class ValidationError(DatasetError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Binary classification data: an n x d feature matrix and 0/1 labels.

    Arrays are copied and made read-only on construction so a Dataset can be
    shared freely between threads.
    """

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(
                f"labels must be a vector of length {X.shape[0]}, got shape {y.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"need at least one row and one feature, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain NaN or infinite values")
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise ValidationError(f"label at row {bad[0]} is {y[bad[0]]!r}, expected 0 or 1")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=2)

    def require_both_classes(self):
        if np.any(self.class_counts() == 0):
            raise ValidationError(f"{self.name}: both classes must be present")

    def subset(self, idx, name: str | None = None) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx],
                       name or self.name, dict(self.meta))

    def with_labels(self, labels, **meta) -> Dataset:
        return Dataset(self.features, labels, self.name, {**self.meta, **meta})

    def with_features(self, features) -> Dataset:
        return Dataset(features, self.labels, self.name, dict(self.meta))


def flip(labels: np.ndarray) -> np.ndarray:
    return 1 - labels


# ---------------------------------------------------------------- CSV I/O

def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def load_csv(path) -> Dataset:
    """Read a ``f1,...,fd,y`` CSV file.

    Rows are reported 1-based counting the header as row 1, which is what a
    spreadsheet shows.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        d = len(header) - 1
        expected = [f"f{i + 1}" for i in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise SchemaError(f"{path}: header must be f1,...,fd,y; got {','.join(header)}")
        rows, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise SchemaError(
                    f"{path}: row {lineno} has {len(row)} columns, expected {d + 1}")
            try:
                rows.append([float(v) for v in row[:d]])
                yv = float(row[d])
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}") from None
            if yv not in (0.0, 1.0):
                raise ValidationError(f"{path}: row {lineno}: label {row[d]!r} not in {{0,1}}")
            ys.append(int(yv))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    meta = {"source": str(path)}
    side = _sidecar(path)
    if side.exists():
        meta = {**json.loads(side.read_text()), "source": str(path)}
    ds = Dataset(np.array(rows), np.array(ys), path.stem, meta)
    if ds.n < MIN_ROWS:
        raise ValidationError(f"{path}: need at least {MIN_ROWS} rows, got {ds.n}")
    ds.require_both_classes()
    return ds


def save_csv(ds: Dataset, path, meta: dict | None = None):
    """Write ``ds`` as CSV plus a ``<name>.meta.json`` sidecar.

    Floats are written with ``repr`` so a load reproduces them bit for bit.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"f{i + 1}" for i in range(ds.d)] + ["y"]
    lines = [",".join(header)]
    for x, y in zip(ds.features, ds.labels):
        lines.append(",".join(repr(float(v)) for v in x) + f",{int(y)}")
    path.write_text("\n".join(lines) + "\n")
    side = {k: ds.meta.get(k) for k in ("source", "difficulty", "noise", "attack", "rate", "seed")}
    side.update(meta or {})
    _sidecar(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------- normalization

@dataclass(frozen=True)
class Normalizer:
    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> Normalizer:
        X = np.asarray(X, dtype=float)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        # constant columns pass through centered
        stds = np.where(stds > 1e-12 * np.maximum(1.0, np.abs(means)), stds, 1.0)
        return cls(means, stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds

    def apply(self, ds: Dataset) -> Dataset:
        return ds.with_features(self.transform(ds.features))


# -------------------------------------------------------------- splitting

@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    seed: int
    train_idx: np.ndarray
    test_idx: np.ndarray


def stratified_indices(labels: np.ndarray, ratio: float, seed: int):
    """Return (train_idx, test_idx), both sorted, stratified by label."""
    labels = np.asarray(labels)
    gen = rng(seed, "split")
    train = []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ValidationError(f"class {c} has {idx.size} examples; cannot stratify")
        idx = gen.permutation(idx)
        k = int(np.floor(idx.size * ratio + 0.5))
        k = min(max(k, 1), idx.size - 1)
        train.append(idx[:k])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(labels.size), train)
    return train, test


def train_test_split(ds: Dataset, ratio: float = 0.8, seed: int = 0) -> Split:
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    tr, te = stratified_indices(ds.labels, ratio, seed)
    return Split(ds.subset(tr, ds.name), ds.subset(te, ds.name), seed, tr, te)


# ------------------------------------------------------------- difficulty

class Difficulty(enum.Enum):
    EASY = "easy"
    NORMAL = "normal"
    HARD = "hard"


def grade_accuracy(acc: float) -> Difficulty:
    if acc >= 0.90:
        return Difficulty.EASY
    if acc >= 0.70:
        return Difficulty.NORMAL
    return Difficulty.HARD


def difficulty_accuracy(ds: Dataset, seed: int = 0) -> float:
    """Test accuracy of the nonlinear surrogate on an 80-20 split."""
    from .classifiers import TrainConfig, accuracy, train_rff

    sp = train_test_split(ds, 0.8, seed)
    norm = Normalizer.fit(sp.train.features)
    model = train_rff(norm.apply(sp.train), TrainConfig(seed=seed))
    return accuracy(model, norm.apply(sp.test))


def categorize_difficulty(ds: Dataset, seed: int = 0) -> Difficulty:
    return grade_accuracy(difficulty_accuracy(ds, seed))


# ------------------------------------------------------ synthetic datasets

@dataclass(frozen=True)
class SynthSpec:
    """Knobs of the synthetic generator.

    Each class is a mixture of two isotropic Gaussian clusters. The class
    centers sit ``class_sep`` apart along one random direction and each
    class's two clusters sit ``class_sep`` apart along a second, orthogonal
    one; the remaining ``d - 2`` directions carry noise only.
    """

    n: int = 250
    d: int = 4
    class_sep: float = 4.0
    cluster_spread: float = 1.0
    label_noise: float = 0.0


def gen_synthetic(spec: SynthSpec, seed: int = 0, name: str | None = None) -> Dataset:
    if spec.n < 8 or spec.d < 2:
        raise ValueError(f"need n >= 8 and d >= 2, got n={spec.n}, d={spec.d}")
    gen = rng(seed, "synthetic")
    Q, _ = np.linalg.qr(gen.standard_normal((spec.d, spec.d)))
    u, v = Q[:, 0], Q[:, 1]
    half = spec.class_sep / 2.0
    counts = np.array([spec.n // 2, spec.n - spec.n // 2])
    X, y = [], []
    for c in (0, 1):
        sizes = [counts[c] // 2, counts[c] - counts[c] // 2]
        for k in (0, 1):
            center = (2 * c - 1) * half * u + (2 * k - 1) * half * v
            X.append(center + spec.cluster_spread * gen.standard_normal((sizes[k], spec.d)))
            y.append(np.full(sizes[k], c))
    X = np.vstack(X)
    y = np.concatenate(y)
    order = gen.permutation(spec.n)
    ds = Dataset(X[order], y[order], name or f"synth-{seed}",
                 {"source": "synthetic", "class_sep": spec.class_sep,
                  "cluster_spread": spec.cluster_spread, "seed": seed, "noise": 0.0})
    if spec.label_noise > 0:
        ds = inject_label_noise(ds, spec.label_noise, seed)
    return ds


# ------------------------------------------------------------ label noise

def n_random_flips(n: int, rate: float) -> int:
    return int(np.floor(n * rate + 0.5))


def random_flip_indices(n: int, rate: float, seed: int) -> np.ndarray:
    if not 0.0 <= rate <= 0.5:
        raise ValueError(f"rate must be in [0, 0.5], got {rate}")
    k = n_random_flips(n, rate)
    return np.sort(rng(seed, "label-noise").choice(n, size=k, replace=False))


def inject_label_noise(ds: Dataset, rate: float, seed: int = 0) -> Dataset:
    idx = random_flip_indices(ds.n, rate, seed)
    y = ds.labels.copy()
    y[idx] = flip(y[idx])
    return ds.with_labels(y, noise=rate)


# ------------------------------------------------- graded synthetic pools

SEP_RANGES = {
    Difficulty.EASY: (3.5, 7.0),
    Difficulty.NORMAL: (1.6, 3.2),
    Difficulty.HARD: (0.2, 1.4),
}
N_RANGE = (200, 300)
D_RANGE = (2, 8)


def random_spec(gen: np.random.Generator, sep_range) -> SynthSpec:
    return SynthSpec(n=int(gen.integers(N_RANGE[0], N_RANGE[1] + 1)),
                     d=int(gen.integers(D_RANGE[0], D_RANGE[1] + 1)),
                     class_sep=float(gen.uniform(*sep_range)),
                     cluster_spread=1.0)


def synth_by_difficulty(level: Difficulty | str, count: int, seed: int = 0,
                        max_tries: int = 200) -> list[Dataset]:
    """``count`` synthetic datasets that all grade as ``level``.

    Candidates are drawn from a separation range typical for the level and
    kept only if the surrogate's test accuracy actually lands in its band.
    """
    level = Difficulty(level)
    out = []
    for i in range(count):
        for attempt in range(max_tries):
            s = int(rng(seed, level.value, i, attempt).integers(2 ** 31))
            spec = random_spec(rng(s, "spec"), SEP_RANGES[level])
            ds = gen_synthetic(spec, s, name=f"{level.value}-{seed}-{i}")
            if categorize_difficulty(ds, s) is level:
                ds.meta["difficulty"] = level.value
                out.append(ds)
                break
        else:
            raise RuntimeError(f"no {level.value} dataset after {max_tries} tries")
    return out


def synth_noise_grid(count: int, rates, seed: int = 0) -> list[Dataset]:
    """``count`` base datasets of mixed difficulty, each at every label-noise rate."""
    out = []
    for i in range(count):
        s = int(rng(seed, "noise-base", i).integers(2 ** 31))
        spec = random_spec(rng(s, "spec"), (1.6, 7.0))
        base = gen_synthetic(spec, s, name=f"noise-{seed}-{i}")
        for rate in rates:
            ds = inject_label_noise(base, rate, s)
            out.append(Dataset(ds.features, ds.labels, f"{base.name}-n{round(rate * 100):02d}",
                               ds.meta))
    return out
