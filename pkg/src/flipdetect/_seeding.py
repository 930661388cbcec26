"""Named random-stream derivation.

Every stochastic step takes an integer seed. Sub-steps derive their own
seed from a parent seed plus a stage name, so partial re-runs reproduce
exactly the same streams.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *names) -> int:
    h = hashlib.sha256(str(int(root)).encode())
    for name in names:
        h.update(b"\x1f")
        h.update(str(name).encode())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def rng(root: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *names))
