"""Shared parameter grid for the agreement tests."""

from __future__ import annotations

import math

import numpy as np

from freshcache.model import CostParams, ItemParams

GRID_SEED = 7


def random_grid(n: int = 20, seed: int = GRID_SEED):
    """``n`` points (item, beta, costs) with beta*p, lam and c_f/c_a log-uniform.

    Ranges: beta*p in [0.1, 10], lam in [0.01, 5], c_f/c_a in [2, 100].
    The item has p = 1 so beta equals the request rate.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        bp = math.exp(rng.uniform(math.log(0.1), math.log(10)))
        lam = math.exp(rng.uniform(math.log(0.01), math.log(5)))
        ratio = math.exp(rng.uniform(math.log(2), math.log(100)))
        out.append((ItemParams(1.0, lam), bp, CostParams(1.0, 1.0 / ratio)))
    return out


def point_id(point) -> str:
    item, bp, costs = point
    return f"bp={bp:.3g},lam={item.lam:.3g},r={costs.c_f / costs.c_a:.3g}"
