"""Feature extractor: a small two-hidden-layer perceptron with tanh hiddens
and a linear head, plus its exact analytic backward pass. Stands in for a
heavy image backbone at desk scale; its parameter count never depends on how
many labels have been learned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIDDEN_UNITS = 64


@dataclass
class ExtractorParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def clone(self) -> "ExtractorParams":
        return ExtractorParams(*(a.copy() for a in self.arrays()))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)


@dataclass
class ExtractorGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)


@dataclass
class ExtractorCache:
    x: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    squeeze: bool


def init_extractor(
    input_dim: int, output_dim: int, rng, hidden: int = HIDDEN_UNITS
) -> ExtractorParams:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases."""

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return ExtractorParams(
        w1=layer(input_dim, hidden),
        b1=np.zeros(hidden),
        w2=layer(hidden, hidden),
        b2=np.zeros(hidden),
        w3=layer(hidden, output_dim),
        b3=np.zeros(output_dim),
    )


def extract(x, params: ExtractorParams) -> tuple[np.ndarray, ExtractorCache]:
    """Forward pass; accepts a single vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != params.w1.shape[0]:
        raise ValueError(f"input length {x2.shape[1]} != {params.w1.shape[0]}")
    a1 = np.tanh(x2 @ params.w1 + params.b1)
    a2 = np.tanh(a1 @ params.w2 + params.b2)
    f = a2 @ params.w3 + params.b3
    cache = ExtractorCache(
        x=x2, a1=a1, a2=a2, w1=params.w1, w2=params.w2, w3=params.w3, squeeze=squeeze
    )
    return (f[0] if squeeze else f), cache


def extract_backward(cache: ExtractorCache, df) -> tuple[ExtractorGrads, np.ndarray]:
    """Exact reverse pass; returns parameter gradients and the input gradient.

    Batch gradients are sums of per-sample contributions.
    """
    df = np.asarray(df, dtype=np.float64)
    df2 = np.atleast_2d(df)
    if df2.shape != (cache.a2.shape[0], cache.w3.shape[1]):
        raise ValueError(f"upstream gradient shape {df.shape} does not match cache")
    dw3 = cache.a2.T @ df2
    db3 = df2.sum(axis=0)
    dz2 = (df2 @ cache.w3.T) * (1.0 - cache.a2**2)
    dw2 = cache.a1.T @ dz2
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ cache.w2.T) * (1.0 - cache.a1**2)
    dw1 = cache.x.T @ dz1
    db1 = dz1.sum(axis=0)
    dx = dz1 @ cache.w1.T
    grads = ExtractorGrads(w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3)
    return grads, (dx[0] if cache.squeeze else dx)
