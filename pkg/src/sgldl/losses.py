"""Training losses for the incremental protocol.

Three terms, each returning its scalar and exact analytic gradient:

  * gradient-compensated Canberra loss — per-label Canberra terms reweighted
    so new labels receive proportionally more learning pressure,
  * distillation loss — cross-entropy tying the new model's old-label slice
    to the frozen previous model's outputs,
  * relationship-preserving loss — squared drift of old label nodes' graph
    embeddings from their stored post-previous-task values.

Compensation weights are constants for differentiation purposes: they are
recomputed per mini-batch but no gradient flows through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import LOG_CLAMP, softmax
from .extractor import ExtractorGrads, ExtractorParams, extract, extract_backward
from .graph import GcnGrads, GcnParams, gcn_backward, gcn_forward


@dataclass(frozen=True)
class LossWeights:
    nc: float = 1.0
    dt: float = 1.0
    rp: float = 1.0

    def __post_init__(self):
        for name, value in (("nc", self.nc), ("dt", self.dt), ("rp", self.rp)):
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"loss weight {name} must be finite and >= 0")


def canberra_terms(pred, target) -> np.ndarray:
    """Element-wise |p - y| / (p + y), with 0/0 terms defined as 0."""
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    num = np.abs(p - y)
    den = p + y
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)


def canberra_term_grad(pred, target) -> np.ndarray:
    """d/dp of the per-label Canberra term: sign(p - y) * 2y / (p + y)^2."""
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    den = (p + y) ** 2
    base = np.divide(2.0 * y, den, out=np.zeros_like(den), where=den > 0.0)
    return np.sign(p - y) * base


def gradient_measurement(pred, target) -> np.ndarray:
    """Per-label gradient of the Canberra term at the pre-softmax score.

    Uses the diagonal softmax Jacobian p(1 - p); sign(0) = 0, so perfectly
    matched labels measure 0.
    """
    p = np.asarray(pred, dtype=np.float64)
    return canberra_term_grad(pred, target) * p * (1.0 - p)


def new_label_gradient_mean(measurements, new_start: int) -> float:
    """Mean absolute measurement over all samples and new labels."""
    m = np.atleast_2d(np.asarray(measurements, dtype=np.float64))
    if new_start >= m.shape[1]:
        raise ValueError("empty new-label range")
    return float(np.abs(m[:, new_start:]).mean())


def compensation_weights(pred, target, new_start: int) -> np.ndarray:
    """Per-entry loss weights: old labels exactly 1, new labels |G| / mean|G|.

    A zero new-label mean degenerates to all-ones weights (uncompensated
    loss) rather than dividing by zero.
    """
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    y = np.atleast_2d(np.asarray(target, dtype=np.float64))
    g = np.abs(gradient_measurement(p, y))
    w = np.ones_like(g)
    if new_start < g.shape[1]:
        g_new_mean = g[:, new_start:].mean()
        if g_new_mean > 0.0:
            w[:, new_start:] = g[:, new_start:] / g_new_mean
    return w


def softmax_score_grad(probs, dprobs) -> np.ndarray:
    """Chain a gradient on softmax outputs back to the pre-softmax scores."""
    p = np.asarray(probs, dtype=np.float64)
    g = np.asarray(dprobs, dtype=np.float64)
    return p * (g - (g * p).sum(axis=-1, keepdims=True))


def nc_loss(pred, target, weights) -> tuple[float, np.ndarray]:
    """Weighted batch-mean Canberra loss and its gradient on the scores.

    `weights` are treated as constants; with all-ones weights this is the
    plain mean Canberra distance over the batch.
    """
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    y = np.atleast_2d(np.asarray(target, dtype=np.float64))
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    if p.shape != y.shape or p.shape != w.shape:
        raise ValueError(f"shape mismatch: {p.shape}, {y.shape}, {w.shape}")
    b = p.shape[0]
    value = float((w * canberra_terms(p, y)).sum() / b)
    dp = w * canberra_term_grad(p, y) / b
    return value, softmax_score_grad(p, dp)


def mean_canberra_loss(pred, target) -> tuple[float, np.ndarray]:
    """Uncompensated batch-mean Canberra loss (the naive-control objective)."""
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    return nc_loss(pred, target, np.ones_like(p))


def dt_loss(pred, old_outputs) -> tuple[float, np.ndarray]:
    """Distillation: cross-entropy from the frozen old model's distribution to
    the new model's renormalized old-label slice.

    Returns the batch-mean loss and its gradient on the full score vector
    (new-label scores receive gradient only through the softmax coupling).
    """
    p = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    q = np.atleast_2d(np.asarray(old_outputs, dtype=np.float64))
    b, c = p.shape
    c_old = q.shape[1]
    if q.shape[0] != b or c_old > c:
        raise ValueError(f"old outputs shape {q.shape} does not fit predictions {p.shape}")
    s = p[:, :c_old].sum(axis=1, keepdims=True)
    p_old = p[:, :c_old] / s
    value = float(-(q * np.log(np.maximum(p_old, LOG_CLAMP))).sum() / b)
    dp = np.zeros_like(p)
    q_total = q.sum(axis=1, keepdims=True)
    # clamp keeps the gradient finite when a probability underflows to 0
    dp[:, :c_old] = (-q / np.maximum(p[:, :c_old], LOG_CLAMP) + q_total / s) / b
    return value, softmax_score_grad(p, dp)


def rp_loss(g_prev, h) -> tuple[float, np.ndarray]:
    """Squared Euclidean drift of the old label nodes' embeddings.

    Rows are aligned by position: old labels always occupy the leading rows
    of the grown embedding.
    """
    g_prev = np.asarray(g_prev, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n_old = g_prev.shape[0]
    if n_old > h.shape[0] or g_prev.shape[1] != h.shape[1]:
        raise ValueError(f"stored embedding {g_prev.shape} does not align with {h.shape}")
    diff = h[:n_old] - g_prev
    dh = np.zeros_like(h)
    dh[:n_old] = 2.0 * diff
    return float((diff**2).sum()), dh


@dataclass
class TotalLossResult:
    value: float
    nc: float
    dt: float
    rp: float
    probs: np.ndarray
    extractor_grads: ExtractorGrads
    gcn_grads: GcnGrads


def total_loss(
    x,
    target,
    *,
    extractor: ExtractorParams,
    gcn: GcnParams,
    h0,
    a_hat,
    weights: LossWeights,
    new_start: int,
    old_outputs=None,
    g_prev=None,
    nc_weights=None,
    use_compensation: bool = True,
) -> TotalLossResult:
    """Combined training loss with exact gradients on extractor and graph
    parameters.

    The distillation and relationship terms contribute only when the frozen
    old outputs / stored embedding are provided (that is, from the second
    task on). Pass `nc_weights` to pin the compensation weights, e.g. for
    finite-difference verification; otherwise they are recomputed from the
    current batch and treated as constants.
    """
    y = np.atleast_2d(np.asarray(target, dtype=np.float64))
    feats, ext_cache = extract(np.atleast_2d(np.asarray(x, dtype=np.float64)), extractor)
    h, gcn_cache = gcn_forward(a_hat, h0, gcn)
    probs = softmax(feats @ h.T)
    if nc_weights is None:
        if use_compensation:
            nc_weights = compensation_weights(probs, y, new_start)
        else:
            nc_weights = np.ones_like(probs)
    nc_value, dscores = nc_loss(probs, y, nc_weights)
    dscores = weights.nc * dscores
    dt_value = 0.0
    if old_outputs is not None:
        dt_value, dt_scores = dt_loss(probs, old_outputs)
        dscores = dscores + weights.dt * dt_scores
    rp_value = 0.0
    dh = dscores.T @ feats
    if g_prev is not None:
        rp_value, dh_rp = rp_loss(g_prev, h)
        dh = dh + weights.rp * dh_rp
    value = weights.nc * nc_value + weights.dt * dt_value + weights.rp * rp_value
    ext_grads, _ = extract_backward(ext_cache, dscores @ h)
    gcn_grads = gcn_backward(gcn_cache, dh)
    return TotalLossResult(
        value=value,
        nc=nc_value,
        dt=dt_value,
        rp=rp_value,
        probs=probs,
        extractor_grads=ext_grads,
        gcn_grads=gcn_grads,
    )
