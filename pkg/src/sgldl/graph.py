"""Label-graph classifier: node embeddings, adjacency normalization, and a
two-layer graph convolution producing one classifier vector per label.

The trainable weights (w1, w2) are independent of the label count; only the
node embeddings and the adjacency grow as labels arrive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import LabelSpace, softmax
from .scm import ScalableCorrelationMatrix

_EMBED_TAG = 11


def init_node_embeddings(labels: LabelSpace, dim: int, seed: int) -> np.ndarray:
    """One deterministic row per label, keyed by (seed, label id).

    Entries lie in [-0.5, 0.5). Keying by id means re-building with a grown
    label space reproduces every old row bit-exactly.
    """
    if dim < 1:
        raise ValueError("embedding dimension must be >= 1")
    if len(labels) == 0:
        return np.zeros((0, dim))
    rows = [
        np.random.default_rng([seed, _EMBED_TAG, lid]).random(dim) - 0.5
        for lid in labels
    ]
    return np.array(rows)


@dataclass
class GcnParams:
    w1: np.ndarray  # (node_dim, hidden)
    w2: np.ndarray  # (hidden, model_dim)

    def clone(self) -> "GcnParams":
        return GcnParams(self.w1.copy(), self.w2.copy())


@dataclass
class GcnGrads:
    w1: np.ndarray
    w2: np.ndarray
    h0: np.ndarray


@dataclass
class GcnCache:
    a_hat: np.ndarray
    ah0: np.ndarray
    a1: np.ndarray
    aa1: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


def init_gcn_params(node_dim: int, hidden_dim: int, model_dim: int, rng) -> GcnParams:
    b1 = 1.0 / np.sqrt(node_dim)
    b2 = 1.0 / np.sqrt(hidden_dim)
    return GcnParams(
        w1=rng.uniform(-b1, b1, size=(node_dim, hidden_dim)),
        w2=rng.uniform(-b2, b2, size=(hidden_dim, model_dim)),
    )


def normalize_adjacency(a) -> np.ndarray:
    """Row-normalized (A + I); self-loops guarantee nonzero row sums."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    if not np.all(np.isfinite(a)) or (a.size and a.min() < 0.0):
        raise ValueError("adjacency must be finite and non-negative")
    m = a + np.eye(a.shape[0])
    return m / m.sum(axis=1, keepdims=True)


def adjacency_from_scm(
    scm: ScalableCorrelationMatrix, threshold: float | None = None
) -> np.ndarray:
    """Normalized adjacency, optionally zeroing entries below a threshold."""
    entries = scm.entries
    if threshold is not None:
        entries = np.where(entries >= threshold, entries, 0.0)
    return normalize_adjacency(entries)


def gcn_forward(a_hat, h0, params: GcnParams) -> tuple[np.ndarray, GcnCache]:
    """H = a_hat . tanh(a_hat . h0 . w1) . w2, with intermediates cached."""
    a_hat = np.asarray(a_hat, dtype=np.float64)
    h0 = np.asarray(h0, dtype=np.float64)
    n = a_hat.shape[0]
    if a_hat.shape != (n, n) or h0.shape[0] != n:
        raise ValueError(f"adjacency {a_hat.shape} does not match {h0.shape[0]} nodes")
    if h0.shape[1] != params.w1.shape[0] or params.w1.shape[1] != params.w2.shape[0]:
        raise ValueError("embedding/weight dimension chain is inconsistent")
    ah0 = a_hat @ h0
    a1 = np.tanh(ah0 @ params.w1)
    aa1 = a_hat @ a1
    h = aa1 @ params.w2
    return h, GcnCache(a_hat=a_hat, ah0=ah0, a1=a1, aa1=aa1, w1=params.w1, w2=params.w2)


def gcn_backward(cache: GcnCache, dh) -> GcnGrads:
    """Exact reverse pass for any scalar loss with gradient dh on the output."""
    dh = np.asarray(dh, dtype=np.float64)
    if dh.shape != (cache.aa1.shape[0], cache.w2.shape[1]):
        raise ValueError(f"upstream gradient shape {dh.shape} does not match cache")
    dw2 = cache.aa1.T @ dh
    da1 = cache.a_hat.T @ (dh @ cache.w2.T)
    dz1 = da1 * (1.0 - cache.a1**2)
    dw1 = cache.ah0.T @ dz1
    dh0 = cache.a_hat.T @ (dz1 @ cache.w1.T)
    return GcnGrads(w1=dw1, w2=dw2, h0=dh0)


def predict_scores(h, feats) -> np.ndarray:
    """Per-label scores h . f for a single feature vector or a batch of rows."""
    h = np.asarray(h, dtype=np.float64)
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape[-1] != h.shape[1]:
        raise ValueError(f"feature length {feats.shape[-1]} != {h.shape[1]}")
    return feats @ h.T


def predict(h, feats) -> np.ndarray:
    """Softmax over the per-label scores."""
    return softmax(predict_scores(h, feats))
