"""Complexity measures of a binary classification dataset.

The vector has 27 entries: 22 measures normalized to [0, 1] from six
families (feature overlap, linearity, neighborhood, network, dimensionality,
class balance) followed by the standard deviations of five per-instance
measures. Larger values mean a harder (more complex) task, except C1 where
1 means perfectly balanced classes.

Rows are put into a canonical order before anything else is computed, and
the seed for the sampled measures (L3, N4 and the linear fit behind L1/L2)
is derived from that canonical content. Row shuffles therefore change
nothing, and rescaling a feature changes nothing beyond round-off.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._seeding import derive_seed, rng
from .classifiers import TrainConfig, fit_linear
from .data import Dataset, Normalizer, ValidationError

log = logging.getLogger(__name__)

NORMALIZED = (
    "F1", "F1v", "F2", "F3", "F4",
    "L1", "L2", "L3",
    "N1", "N2", "N3", "N4", "T1", "LSC",
    "Density", "ClsCoef", "Hubs",
    "T2", "T3", "T4",
    "C1", "C2",
)
DEVIATIONS = ("N2_std", "N3_std", "N4_std", "L1_std", "L2_std")

N_INTERPOLATED = 500
FISHER_RIDGE = 1e-6
EPSILON_PERCENTILE = 15.0
PCA_VARIANCE = 0.95
CONTAIN_TOL = 1e-9
LINEAR_CFG = dict(epochs=100, learning_rate=0.1, batch_size=32, l2=1e-3)


def measure_names() -> list[str]:
    return list(NORMALIZED + DEVIATIONS)


@dataclass(frozen=True, eq=False)
class CMVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(NORMALIZED) + len(DEVIATIONS),):
            raise ValueError(f"expected 27 values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> float:
        return float(self.values[measure_names().index(name)])

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, CMVector):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash(self.values.tobytes())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def as_dict(self) -> dict:
        return dict(zip(measure_names(), map(float, self.values)))


# ----------------------------------------------------------- preparation

def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row order sorted by features (first column most significant), then label."""
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def content_seed(y_canonical: np.ndarray, d: int, seed: int) -> int:
    digest = hashlib.sha256(np.ascontiguousarray(y_canonical, dtype=np.int8).tobytes())
    return derive_seed(seed, "cmeasures", y_canonical.size, d, digest.hexdigest())


# ----------------------------------------------------- feature overlap

def fisher_ratios(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    mu = X.mean(axis=0)
    num = np.zeros(X.shape[1])
    den = np.zeros(X.shape[1])
    for c in (0, 1):
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        num += Xc.shape[0] * (mc - mu) ** 2
        den += np.sum((Xc - mc) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                     np.where(num > 0, np.inf, 0.0))
    return r


def f1(X, y) -> float:
    return float(1.0 / (1.0 + np.max(fisher_ratios(X, y))))


def f1v(X, y) -> float:
    X0, X1 = X[y == 0], X[y == 1]
    p0, p1 = X0.shape[0] / X.shape[0], X1.shape[0] / X.shape[0]
    diff = X1.mean(axis=0) - X0.mean(axis=0)
    W = p0 * np.atleast_2d(np.cov(X0, rowvar=False, bias=True)) \
        + p1 * np.atleast_2d(np.cov(X1, rowvar=False, bias=True))
    w = np.linalg.solve(W + FISHER_RIDGE * np.eye(X.shape[1]), diff)
    between = float(w @ diff) ** 2
    within = float(w @ W @ w)
    if within <= 0:
        return 0.0 if between > 0 else 1.0
    return 1.0 / (1.0 + between / within)


def _overlap_bounds(X, y):
    X0, X1 = X[y == 0], X[y == 1]
    lo = np.maximum(X0.min(axis=0), X1.min(axis=0))
    hi = np.minimum(X0.max(axis=0), X1.max(axis=0))
    return lo, hi


def f2(X, y) -> float:
    lo, hi = _overlap_bounds(X, y)
    span = X.max(axis=0) - X.min(axis=0)
    ratio = np.where(span > 0, np.maximum(0.0, hi - lo) / np.where(span > 0, span, 1.0), 1.0)
    return float(np.prod(ratio))


def _in_overlap(X, y) -> np.ndarray:
    """Boolean matrix: is point i inside the class-overlap interval of feature f."""
    if np.unique(y).size < 2:
        return np.zeros(X.shape, dtype=bool)
    lo, hi = _overlap_bounds(X, y)
    return (X >= lo) & (X <= hi)


def f3(X, y) -> float:
    return float(_in_overlap(X, y).sum(axis=0).min() / X.shape[0])


def f4(X, y) -> float:
    """Keep removing the points separated by the currently most efficient feature."""
    keep = np.arange(X.shape[0])
    features = list(range(X.shape[1]))
    while features and keep.size:
        inside = _in_overlap(X[np.ix_(keep, features)], y[keep])
        counts = inside.sum(axis=0)
        best = int(np.argmin(counts))
        keep = keep[inside[:, best]]
        features.pop(best)
    return keep.size / X.shape[0]


# ---------------------------------------------------------- linearity

def linearity(X, y, Xi, yi, seed) -> dict:
    model = fit_linear(X, y, TrainConfig(seed=seed, **LINEAR_CFG), "hinge")
    s = 2.0 * y - 1.0
    hinge = np.maximum(0.0, 1.0 - s * model.decision_function(X))
    err = (model.predict(X) != y).astype(float)
    l1_i = hinge / (1.0 + hinge)
    h = hinge.mean()
    return {
        "L1": h / (1.0 + h),
        "L2": err.mean(),
        "L3": float(np.mean(model.predict(Xi) != yi)),
        "L1_std": float(l1_i.std()),
        "L2_std": float(err.std()),
    }


def interpolate(X, y, count, gen) -> tuple[np.ndarray, np.ndarray]:
    """Random convex combinations of same-class pairs; classes drawn by frequency."""
    classes = gen.choice(2, size=count, p=np.bincount(y, minlength=2) / y.size)
    members = [np.flatnonzero(y == c) for c in (0, 1)]
    out = np.empty((count, X.shape[1]))
    for k, c in enumerate(classes):
        a, b = gen.choice(members[c], size=2)
        out[k] = X[a] + gen.uniform() * (X[b] - X[a])
    return out, classes.astype(np.int64)


# -------------------------------------------------------- neighborhood

def prim_mst(D: np.ndarray) -> list[tuple[int, int]]:
    """Edges of a minimum spanning tree of the complete graph with weights D."""
    n = D.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = D[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        edges.append((int(parent[v]), v))
        in_tree[v] = True
        closer = D[v] < best
        best = np.where(closer, D[v], best)
        parent = np.where(closer, v, parent)
    return edges


def n1(D, y) -> float:
    border = np.zeros(y.size, dtype=bool)
    for i, j in prim_mst(D):
        if y[i] != y[j]:
            border[i] = border[j] = True
    return float(border.mean())


def nearest_friend_enemy(D, y):
    """Distance to the nearest same-class point (excluding self) and nearest other-class point."""
    same = y[:, None] == y[None, :]
    Df = np.where(same, D, np.inf)
    np.fill_diagonal(Df, np.inf)
    De = np.where(same, np.inf, D)
    return Df.min(axis=1), De.min(axis=1)


def n2(intra, extra) -> tuple[float, np.ndarray]:
    # a singleton class has no friend; treat its intra distance as its extra one
    intra = np.where(np.isfinite(intra), intra, extra)
    tot = extra.sum()
    r = intra.sum() / tot if tot > 0 else np.inf
    value = r / (1.0 + r) if np.isfinite(r) else 1.0
    both = intra + extra
    per = np.where(both > 0, intra / np.where(both > 0, both, 1.0), 0.5)
    return float(value), per


def loo_1nn_errors(D, y) -> np.ndarray:
    Dl = D.copy()
    np.fill_diagonal(Dl, np.inf)
    nn = np.argmin(Dl, axis=1)
    return (y[nn] != y).astype(float)


def n4_errors(X, y, Xi, yi) -> np.ndarray:
    nn = np.argmin(cdist(Xi, X), axis=1)
    return (y[nn] != yi).astype(float)


def sphere_radii(D, y) -> np.ndarray:
    """Radii of class-pure hyperspheres grown until they touch an enemy sphere.

    A mutual nearest-enemy pair splits its distance evenly; any other point
    takes the distance to its nearest enemy minus that enemy's radius.
    """
    De = np.where(y[:, None] == y[None, :], np.inf, D)
    ne = np.argmin(De, axis=1)
    r = np.full(y.size, np.nan)
    for start in range(y.size):
        chain = []
        i = start
        while np.isnan(r[i]) and i not in chain:
            chain.append(i)
            i = ne[i]
        if np.isnan(r[i]):
            # closed a cycle: its last two members are treated as a mutual pair
            a, b = chain[-1], ne[chain[-1]]
            r[a] = D[a, b] / 2.0
            chain.pop()
        for k in reversed(chain):
            r[k] = D[k, ne[k]] - r[ne[k]]
    return r


def t1(D, y) -> float:
    """Fraction of hyperspheres left after absorbing those inside a same-class one."""
    n = y.size
    r = sphere_radii(D, y)
    # containment is often exact (touching spheres, 1-D data); decide it with a
    # tolerance so round-off from rescaling cannot flip it
    contained = (D + r[:, None] <= r[None, :] + CONTAIN_TOL) & (y[:, None] == y[None, :])
    np.fill_diagonal(contained, False)
    # identical spheres: only the lower index survives
    twin = contained & contained.T
    contained &= ~(twin & (np.arange(n)[None, :] > np.arange(n)[:, None]))
    return float(np.mean(~contained.any(axis=1)))


def lsc(D, enemy) -> float:
    n = D.shape[0]
    sizes = (D < enemy[:, None]).sum(axis=1)
    return float(1.0 - sizes.sum() / n ** 2)


# ------------------------------------------------------------- network

def epsilon_graph(D, y) -> np.ndarray:
    iu = np.triu_indices_from(D, k=1)
    eps = np.percentile(D[iu], EPSILON_PERCENTILE)
    A = (D <= eps) & (y[:, None] == y[None, :])
    np.fill_diagonal(A, False)
    return A


def clustering_coefficients(A: np.ndarray) -> np.ndarray:
    Af = A.astype(float)
    k = Af.sum(axis=1)
    triangles = np.einsum("ij,jk,ki->i", Af, Af, Af) / 2.0
    pairs = k * (k - 1) / 2.0
    return np.where(k >= 2, triangles / np.where(pairs > 0, pairs, 1.0), 0.0)


def hub_scores(A: np.ndarray, iters: int = 5000, tol: float = 1e-12) -> np.ndarray:
    """Eigenvector-centrality hub scores scaled to max 1.

    Iterates on A + I from the all-ones vector: the shift keeps the iteration
    aperiodic and drives isolated vertices to 0.
    """
    if not A.any():
        return np.zeros(A.shape[0])
    M = A.astype(float) + np.eye(A.shape[0])
    x = np.ones(A.shape[0])
    for _ in range(iters):
        nxt = M @ x
        nxt /= nxt.max()
        if np.max(np.abs(nxt - x)) < tol:
            x = nxt
            break
        x = nxt
    return x


def network(D, y) -> dict:
    A = epsilon_graph(D, y)
    n = y.size
    return {
        "Density": 1.0 - A.sum() / (n * (n - 1)),
        "ClsCoef": 1.0 - float(clustering_coefficients(A).mean()),
        "Hubs": 1.0 - float(hub_scores(A).mean()),
    }


# ---------------------------------------------------- dimensionality

def pca_components(X: np.ndarray, share: float = PCA_VARIANCE) -> int:
    if X.shape[1] == 1:
        return 1
    ev = np.linalg.eigvalsh(np.cov(X, rowvar=False, bias=True))[::-1]
    ev = np.clip(ev, 0.0, None)
    total = ev.sum()
    if total <= 0:
        return 1
    ratio = np.cumsum(ev) / total
    return int(np.searchsorted(ratio, share - 1e-12) + 1)


def dimensionality(X) -> dict:
    n, d = X.shape
    m = pca_components(X)
    return {"T2": d / n, "T3": m / n, "T4": m / d}


# ------------------------------------------------------- class balance

def balance(y) -> dict:
    p = np.bincount(y, minlength=2) / y.size
    nz = p[p > 0]
    c1 = float(-(nz * np.log(nz)).sum() / np.log(2))
    n0, n1_ = np.bincount(y, minlength=2)
    ir = 0.5 * (n0 / n1_ + n1_ / n0)
    return {"C1": c1, "C2": 1.0 - 1.0 / ir}


# ------------------------------------------------------------ extract

def _clamp(values: dict, name: str) -> dict:
    for k in NORMALIZED:
        v = values[k]
        if not np.isfinite(v):
            raise ValueError(f"{name}: measure {k} is not finite")
        if v < 0.0 or v > 1.0:
            if v < -1e-12 or v > 1.0 + 1e-12:
                log.warning("%s: measure %s=%.6g clamped to [0, 1]", name, k, v)
            values[k] = min(max(v, 0.0), 1.0)
    return values


def extract_dict(ds: Dataset, seed: int = 0) -> dict:
    ds.require_both_classes()
    if ds.n < 10:
        raise ValidationError(f"{ds.name}: need at least 10 examples, got {ds.n}")
    order = canonical_order(ds.features, ds.labels)
    X = Normalizer.fit(ds.features[order]).transform(ds.features[order])
    y = ds.labels[order]
    gen = rng(content_seed(y, ds.d, seed), "interpolation")
    Xi, yi = interpolate(X, y, N_INTERPOLATED, gen)
    lin_seed = content_seed(y, ds.d, derive_seed(seed, "linear"))

    D = cdist(X, X)
    intra, extra = nearest_friend_enemy(D, y)
    n2_val, n2_i = n2(intra, extra)
    n3_i = loo_1nn_errors(D, y)
    n4_i = n4_errors(X, y, Xi, yi)

    values = {
        "F1": f1(X, y), "F1v": f1v(X, y), "F2": f2(X, y), "F3": f3(X, y), "F4": f4(X, y),
        "N1": n1(D, y), "N2": n2_val, "N3": float(n3_i.mean()), "N4": float(n4_i.mean()),
        "T1": t1(D, y), "LSC": lsc(D, extra),
        "N2_std": float(n2_i.std()), "N3_std": float(n3_i.std()), "N4_std": float(n4_i.std()),
    }
    values.update(linearity(X, y, Xi, yi, lin_seed))
    values.update(network(D, y))
    values.update(dimensionality(X))
    values.update(balance(y))
    values = _clamp(values, ds.name)
    return {k: float(values[k]) for k in measure_names()}


def extract(ds: Dataset, seed: int = 0) -> CMVector:
    values = extract_dict(ds, seed)
    return CMVector(np.array([values[k] for k in measure_names()]))
