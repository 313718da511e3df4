"""Label spaces, label distributions, and distribution metrics.

A distribution is a dense float64 vector aligned to an ordered label space.
Metric functions accept plain array-likes of equal length; everything here is
a pure function, safe to call from any thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGREE_SUM_TOL = 1e-9
LOG_CLAMP = 1e-12


class ZeroMassError(ValueError):
    """Restricting a distribution left no probability mass to renormalize."""


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, duplicate-free sequence of stable non-negative label ids.

    Ids are never reused; the order of a space is the order of first
    appearance, so the cumulative space of a task sequence is always the
    previous space followed by the task's new labels.
    """

    ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        object.__setattr__(self, "ids", ids)
        if any(i < 0 for i in ids):
            raise ValueError("label ids must be non-negative")
        if len(set(ids)) != len(ids):
            raise ValueError("label ids must be unique")

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __contains__(self, label_id) -> bool:
        return label_id in self.ids

    def prefix(self, n: int) -> "LabelSpace":
        if not 0 <= n <= len(self.ids):
            raise ValueError(f"prefix length {n} out of range")
        return LabelSpace(self.ids[:n])

    def extend(self, new_ids) -> "LabelSpace":
        new_ids = tuple(int(i) for i in new_ids)
        overlap = set(self.ids) & set(new_ids)
        if overlap:
            raise ValueError(f"labels {sorted(overlap)} already present")
        return LabelSpace(self.ids + new_ids)

    def is_prefix_of(self, other: "LabelSpace") -> bool:
        return other.ids[: len(self.ids)] == self.ids

    def positions_of(self, other: "LabelSpace") -> np.ndarray:
        """Index of each of `other`'s ids within this space."""
        index = {lid: i for i, lid in enumerate(self.ids)}
        try:
            return np.array([index[lid] for lid in other.ids], dtype=np.intp)
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]} not in space") from None


def label_range(n: int) -> LabelSpace:
    """The space of ids 0..n-1."""
    return LabelSpace(tuple(range(n)))


@dataclass
class LabelDistribution:
    """Degrees over an ordered label space; validated on construction.

    Degrees must lie in [0, 1] and sum to 1 within 1e-9.
    """

    space: LabelSpace
    degrees: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.degrees, dtype=np.float64)
        if d.shape != (len(self.space),):
            raise ValueError(
                f"degrees shape {d.shape} does not match space of {len(self.space)}"
            )
        if d.size and (d.min() < 0.0 or d.max() > 1.0):
            raise ValueError("degrees must lie in [0, 1]")
        if abs(float(d.sum()) - 1.0) > DEGREE_SUM_TOL:
            raise ValueError(f"degrees sum to {d.sum():.12g}, expected 1")
        self.degrees = d


def _paired(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return p, q


def euclidean_distance(p, q) -> float:
    """Root of the summed squared per-label differences."""
    p, q = _paired(p, q)
    return float(np.sqrt(np.sum((p - q) ** 2)))


def kl_divergence(p, q) -> float:
    """Standard KL divergence sum(p * ln(p/q)).

    q is clamped at 1e-12 and p == 0 terms contribute 0.
    """
    p, q = _paired(p, q)
    q = np.maximum(q, LOG_CLAMP)
    safe_p = np.where(p > 0.0, p, 1.0)
    return float(np.sum(p * np.log(safe_p / q)))


def intersection(p, q) -> float:
    """Summed per-label minimum; 1 for identical normalized distributions."""
    p, q = _paired(p, q)
    return float(np.sum(np.minimum(p, q)))


def fidelity(p, q) -> float:
    """Summed per-label sqrt(p*q); 1 iff the distributions coincide."""
    p, q = _paired(p, q)
    return float(np.sum(np.sqrt(p * q)))


def canberra(p, q) -> float:
    """Sum of |p-q| / (p+q) with 0/0 terms defined as 0."""
    p, q = _paired(p, q)
    num = np.abs(p - q)
    den = p + q
    terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    return float(np.sum(terms))


def softmax(scores) -> np.ndarray:
    """Max-subtracted softmax along the last axis."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("softmax requires finite scores")
    z = np.exp(s - s.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def restrict_and_renormalize(degrees, space: LabelSpace, learned: LabelSpace) -> np.ndarray:
    """Project a distribution onto the learned labels and rescale to sum 1.

    Raises ZeroMassError when the learned labels carry no mass (the caller
    treats such test instances as degenerate and skips them).
    """
    d = np.asarray(degrees, dtype=np.float64)
    if d.shape != (len(space),):
        raise ValueError(f"degrees shape {d.shape} does not match space of {len(space)}")
    kept = d[space.positions_of(learned)]
    total = float(kept.sum())
    if total <= 0.0:
        raise ZeroMassError("restricted distribution has zero mass")
    return kept / total
