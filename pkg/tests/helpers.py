"""Shared test oracles and utilities.

The correlation-matrix oracles below are deliberately independent of the
library: plain Python loops accumulating per-sample statistics per ordered
pair, then the coefficient of variation computed from first principles.
"""

from __future__ import annotations

import math

import numpy as np


def oracle_cv(samples) -> float:
    n = len(samples)
    if n == 0:
        return 0.0
    mean = sum(samples) / n
    if mean == 0.0:
        return 0.0
    variance = sum((s - mean) ** 2 for s in samples) / n
    return math.sqrt(variance) / mean


def oracle_m(new_degrees) -> np.ndarray:
    rows = [list(r) for r in np.asarray(new_degrees)]
    m = len(rows[0])
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            stats = []
            for row in rows:
                if row[j] != 0.0:
                    stats.append(row[i] / row[j])
            out[i, j] = oracle_cv(stats)
    return out


def oracle_e(new_degrees, old_degrees, old_outputs) -> np.ndarray:
    dn = np.asarray(new_degrees)
    do = np.asarray(old_degrees)
    dp = np.asarray(old_outputs)
    n_old, n_new = do.shape[1], dn.shape[1]
    out = np.zeros((n_old, n_new))
    for a in range(n_old):
        for b in range(n_new):
            stats = []
            for k in range(dn.shape[0]):
                if dp[k, a] != 0.0 and do[k, a] != 0.0 and dn[k, b] != 1.0:
                    stats.append(
                        dn[k, b] / math.sqrt((1.0 - dn[k, b]) * dp[k, a] * do[k, a])
                    )
            out[a, b] = oracle_cv(stats)
    return out


def oracle_r(new_degrees, old_degrees, old_outputs) -> np.ndarray:
    dn = np.asarray(new_degrees)
    do = np.asarray(old_degrees)
    dp = np.asarray(old_outputs)
    n_old, n_new = do.shape[1], dn.shape[1]
    out = np.zeros((n_new, n_old))
    for b in range(n_new):
        for a in range(n_old):
            stats = []
            for k in range(dn.shape[0]):
                if dn[k, b] != 0.0:
                    stats.append(
                        math.sqrt((1.0 - dn[k, b]) * dp[k, a] * do[k, a]) / dn[k, b]
                    )
            out[b, a] = oracle_cv(stats)
    return out


def random_degree_rows(rng, n, c, zero_rate=0.2) -> np.ndarray:
    """Random normalized degree rows with some exact zeros."""
    d = rng.dirichlet(np.ones(c), size=n)
    mask = rng.random((n, c)) < zero_rate
    # never zero out a full row
    mask[np.arange(n), d.argmax(axis=1)] = False
    d = np.where(mask, 0.0, d)
    return d / d.sum(axis=1, keepdims=True)


def central_diff(fn, arrays, step=1e-5):
    """Central finite differences of a scalar function over parameter arrays."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat_a = a.ravel()
        flat_g = g.ravel()
        for i in range(flat_a.size):
            orig = flat_a[i]
            flat_a[i] = orig + step
            up = fn()
            flat_a[i] = orig - step
            down = fn()
            flat_a[i] = orig
            flat_g[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=1e-4) -> float:
    """Worst relative disagreement; the floor keeps entries whose true
    gradient sits at the finite-difference noise level from dominating."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def tiny_experiment_config(**overrides) -> dict:
    cfg = {
        "stream": {
            "total_labels": 6,
            "tasks": 2,
            "sigma": 3.0,
            "train_per_task": 80,
            "test_per_task": 40,
            "feature_dim": 8,
            "noise": 0.05,
            "seed": 0,
        },
        "train": {
            "epochs": 2,
            "batch_size": 16,
            "node_dim": 6,
            "graph_hidden": 8,
            "model_dim": 8,
        },
        "methods": ["sgldl"],
        "seeds": [1],
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and key in cfg:
            cfg[key].update(value)
        else:
            cfg[key] = value
    return cfg
