"""Slow, direct reference implementations used to check the vectorized code."""
import itertools
import math

import networkx as nx
import numpy as np


def zscore(X):
    X = np.asarray(X, float)
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        col = [float(v) for v in X[:, j]]
        mu = math.fsum(col) / len(col)
        sd = math.sqrt(math.fsum((v - mu) ** 2 for v in col) / len(col))
        out[:, j] = [(v - mu) / (sd if sd > 1e-12 else 1.0) for v in col]
    return out


def dist(a, b):
    return math.sqrt(math.fsum((p - q) ** 2 for p, q in zip(a, b)))


def prufer_trees(n):
    """Every labeled spanning tree of K_n, decoded from its Pruefer sequence."""
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for v in seq:
            degree[v] += 1
        edges = []
        for v in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            edges.append((leaf, v))
            degree[leaf] -= 1
            degree[v] -= 1
        u, w = [i for i in range(n) if degree[i] == 1]
        edges.append((u, w))
        yield edges


def brute_force_mst(X):
    best, best_edges = math.inf, None
    for edges in prufer_trees(len(X)):
        w = math.fsum(dist(X[i], X[j]) for i, j in edges)
        if w < best:
            best, best_edges = w, edges
    return best_edges


def kruskal_mst(X):
    g = nx.Graph()
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            g.add_edge(i, j, weight=dist(X[i], X[j]))
    return list(nx.minimum_spanning_tree(g, algorithm="kruskal").edges())


def n1_from_edges(edges, y):
    border = set()
    for i, j in edges:
        if y[i] != y[j]:
            border.update((i, j))
    return len(border) / len(y)


def n3(X, y):
    errors = 0
    for i in range(len(X)):
        best, label = math.inf, None
        for j in range(len(X)):
            if j != i and dist(X[i], X[j]) < best:
                best, label = dist(X[i], X[j]), y[j]
        errors += label != y[i]
    return errors / len(X)


def f1(X, y):
    ratios = []
    for f in range(len(X[0])):
        col = [float(r[f]) for r in X]
        mu = math.fsum(col) / len(col)
        num = den = 0.0
        for c in (0, 1):
            vals = [v for v, lab in zip(col, y) if lab == c]
            mc = math.fsum(vals) / len(vals)
            num += len(vals) * (mc - mu) ** 2
            den += math.fsum((v - mc) ** 2 for v in vals)
        ratios.append(math.inf if den == 0 and num > 0 else (num / den if den else 0.0))
    return 1.0 / (1.0 + max(ratios))


def c1(y):
    n = len(y)
    h = 0.0
    for c in (0, 1):
        p = sum(1 for v in y if v == c) / n
        if p:
            h -= p * math.log(p)
    return h / math.log(2)


def t2(X):
    return len(X[0]) / len(X)


def mann_whitney_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def random_small_dataset(gen, n_max=30, d_max=3):
    """Random two-class data with n <= n_max, d <= d_max and both classes present."""
    n = int(gen.integers(10, n_max + 1))
    d = int(gen.integers(1, d_max + 1))
    X = gen.normal(size=(n, d)) * gen.uniform(0.5, 3.0, size=d)
    y = (gen.random(n) < gen.uniform(0.25, 0.75)).astype(int)
    y[0], y[1] = 0, 1
    return X, y
