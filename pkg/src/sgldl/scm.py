"""Scalable correlation matrix: data-driven inter-label relationships.

The matrix over the cumulative label set is grown block-wise per task:

    [[ old-old (copied verbatim) | old-to-new ],
     [ new-to-old                | new-new    ]]

Each entry is the coefficient of variation of per-sample degree-ratio
statistics, collected only over samples passing that pair's admissibility
conditions. Aggregation is deterministic: statistics are accumulated in
sample order for every pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import LabelSpace


class ScmFormatError(ValueError):
    """Malformed serialized matrix, with line/column diagnostics."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class ScalableCorrelationMatrix:
    labels: LabelSpace
    entries: np.ndarray
    block_boundary: int  # label count of the previous task; 0 for the first

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        c = len(self.labels)
        if e.shape != (c, c):
            raise ValueError(f"entries shape {e.shape} does not match {c} labels")
        if not np.all(np.isfinite(e)):
            raise ValueError("entries must be finite")
        if e.size and e.min() < 0.0:
            raise ValueError("entries must be non-negative")
        if not 0 <= self.block_boundary <= c:
            raise ValueError(f"block boundary {self.block_boundary} out of range")
        self.entries = e


def new_new_stat(d_i: float, d_j: float) -> float | None:
    """Degree ratio d_i / d_j; None (inadmissible) when d_j == 0."""
    if d_j == 0.0:
        return None
    return d_i / d_j


def old_new_stat(d_new: float, d_old: float, d_old_pred: float) -> float | None:
    """Old-to-new influence statistic.

    d_new / sqrt((1 - d_new) * d_old_pred * d_old); inadmissible when the old
    model's output or the old degree is zero, or the new degree is one.
    """
    if d_old_pred == 0.0 or d_old == 0.0 or d_new == 1.0:
        return None
    return d_new / math.sqrt((1.0 - d_new) * d_old_pred * d_old)


def new_old_stat(d_new: float, d_old: float, d_old_pred: float) -> float | None:
    """New-to-old influence statistic: the reciprocal form; needs d_new != 0."""
    if d_new == 0.0:
        return None
    return math.sqrt((1.0 - d_new) * d_old_pred * d_old) / d_new


def coefficient_of_variation(samples) -> float:
    """Population standard deviation over mean; 0 for empty or zero-mean input.

    The empty/zero-mean convention reads as "no correlation evidence" and
    keeps every matrix entry finite.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.size == 0:
        return 0.0
    mean = float(s.mean())
    if mean == 0.0:
        return 0.0
    variance = float(np.mean((s - mean) ** 2))
    return math.sqrt(variance) / mean


def _check_degrees(name: str, arr) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of per-sample degrees")
    if a.shape[0] == 0:
        raise ValueError("empty dataset")
    return a


def compute_M(new_degrees, with_counts: bool = False):
    """New-new block: CV of pairwise degree ratios over admissible samples.

    new_degrees: (samples, new_labels) slice of the training distributions.
    Diagonal entries are 0 since every admissible self-ratio equals 1.
    """
    d = _check_degrees("new_degrees", new_degrees)
    m = d.shape[1]
    out = np.zeros((m, m))
    counts = np.zeros((m, m), dtype=np.int64)
    for j in range(m):
        mask = d[:, j] != 0.0
        denom = d[mask, j]
        counts[:, j] = int(mask.sum())
        for i in range(m):
            out[i, j] = coefficient_of_variation(d[mask, i] / denom)
    return (out, counts) if with_counts else out


def compute_E(new_degrees, old_degrees, old_outputs, with_counts: bool = False):
    """Old-to-new block, shape (old_labels, new_labels).

    Entry (a, b) aggregates the old_new_stat of new label b against old label
    a: the statistic pairs a new-label degree with the old model's output and
    the true degree of the old label, so rows are stored by old label even
    though the per-sample statistic is indexed (new, old).
    """
    dn = _check_degrees("new_degrees", new_degrees)
    do = _check_degrees("old_degrees", old_degrees)
    dp = _check_degrees("old_outputs", old_outputs)
    if do.shape != dp.shape or do.shape[0] != dn.shape[0]:
        raise ValueError(
            f"shape mismatch: new {dn.shape}, old {do.shape}, old outputs {dp.shape}"
        )
    n_old, n_new = do.shape[1], dn.shape[1]
    out = np.zeros((n_old, n_new))
    counts = np.zeros((n_old, n_new), dtype=np.int64)
    for a in range(n_old):
        base = (dp[:, a] != 0.0) & (do[:, a] != 0.0)
        for b in range(n_new):
            mask = base & (dn[:, b] != 1.0)
            x = dn[mask, b]
            stats = x / np.sqrt((1.0 - x) * dp[mask, a] * do[mask, a])
            out[a, b] = coefficient_of_variation(stats)
            counts[a, b] = int(mask.sum())
    return (out, counts) if with_counts else out


def compute_R(new_degrees, old_degrees, old_outputs, with_counts: bool = False):
    """New-to-old block, shape (new_labels, old_labels); reciprocal statistic."""
    dn = _check_degrees("new_degrees", new_degrees)
    do = _check_degrees("old_degrees", old_degrees)
    dp = _check_degrees("old_outputs", old_outputs)
    if do.shape != dp.shape or do.shape[0] != dn.shape[0]:
        raise ValueError(
            f"shape mismatch: new {dn.shape}, old {do.shape}, old outputs {dp.shape}"
        )
    n_old, n_new = do.shape[1], dn.shape[1]
    out = np.zeros((n_new, n_old))
    counts = np.zeros((n_new, n_old), dtype=np.int64)
    for b in range(n_new):
        mask = dn[:, b] != 0.0
        x = dn[mask, b]
        for a in range(n_old):
            stats = np.sqrt((1.0 - x) * dp[mask, a] * do[mask, a]) / x
            out[b, a] = coefficient_of_variation(stats)
            counts[b, a] = int(mask.sum())
    return (out, counts) if with_counts else out


def initial_scm(m_block, new_labels: LabelSpace) -> ScalableCorrelationMatrix:
    """First-task matrix: the new-new block is the whole matrix."""
    m = np.asarray(m_block, dtype=np.float64)
    return ScalableCorrelationMatrix(new_labels, m.copy(), 0)


def extend_scm(
    prev: ScalableCorrelationMatrix,
    m_block,
    e_block,
    r_block,
    new_labels: LabelSpace,
) -> ScalableCorrelationMatrix:
    """Grow the matrix by one task; the old block is copied bit-exactly."""
    c0 = len(prev.labels)
    k = len(new_labels)
    m = np.asarray(m_block, dtype=np.float64)
    e = np.asarray(e_block, dtype=np.float64)
    r = np.asarray(r_block, dtype=np.float64)
    if m.shape != (k, k):
        raise ValueError(f"new-new block shape {m.shape}, expected ({k}, {k})")
    if e.shape != (c0, k):
        raise ValueError(f"old-to-new block shape {e.shape}, expected ({c0}, {k})")
    if r.shape != (k, c0):
        raise ValueError(f"new-to-old block shape {r.shape}, expected ({k}, {c0})")
    entries = np.zeros((c0 + k, c0 + k))
    entries[:c0, :c0] = prev.entries
    entries[:c0, c0:] = e
    entries[c0:, :c0] = r
    entries[c0:, c0:] = m
    return ScalableCorrelationMatrix(prev.labels.extend(new_labels), entries, c0)


def serialize_scm(scm: ScalableCorrelationMatrix) -> str:
    """Text form: header, label-id row, then 17-significant-digit value rows."""
    lines = [
        f"scm {len(scm.labels)} {scm.block_boundary}",
        ",".join(str(i) for i in scm.labels),
    ]
    for row in scm.entries:
        lines.append(",".join(format(v, ".17g") for v in row))
    return "\n".join(lines) + "\n"


def deserialize_scm(text: str) -> ScalableCorrelationMatrix:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ScmFormatError("empty input", line=1)
    head = lines[0].split()
    if len(head) != 3 or head[0] != "scm":
        raise ScmFormatError("expected header 'scm <size> <boundary>'", line=1)
    try:
        size = int(head[1])
        boundary = int(head[2])
    except ValueError:
        raise ScmFormatError("non-integer size or boundary", line=1) from None
    if len(lines) < 2:
        raise ScmFormatError("missing label row", line=2)
    label_tokens = lines[1].split(",") if lines[1].strip() else []
    if len(label_tokens) != size:
        raise ScmFormatError(
            f"expected {size} label ids, got {len(label_tokens)}", line=2
        )
    try:
        labels = LabelSpace(tuple(int(t) for t in label_tokens))
    except ValueError as exc:
        raise ScmFormatError(str(exc), line=2) from None
    rows = []
    for r in range(size):
        lineno = 3 + r
        if lineno - 1 >= len(lines):
            raise ScmFormatError(f"expected {size} value rows, got {r}", line=lineno)
        parts = lines[lineno - 1].split(",")
        if len(parts) != size:
            raise ScmFormatError(
                f"expected {size} values, got {len(parts)}", line=lineno
            )
        row = []
        for c, token in enumerate(parts, start=1):
            try:
                row.append(float(token))
            except ValueError:
                raise ScmFormatError(
                    f"bad value {token!r}", line=lineno, column=c
                ) from None
        rows.append(row)
    try:
        return ScalableCorrelationMatrix(labels, np.array(rows), boundary)
    except ValueError as exc:
        raise ScmFormatError(str(exc), line=1) from None


def heatmap_rows(scm: ScalableCorrelationMatrix) -> list[tuple[int, int, float]]:
    """(row_label, col_label, value) triples for external plotting."""
    ids = scm.labels.ids
    return [
        (ids[i], ids[j], float(scm.entries[i, j]))
        for i in range(len(ids))
        for j in range(len(ids))
    ]
