"""Truncated ground costs.

The working cost between points x and y is min{d(x, y), lam}**p: Euclidean
distance capped at the truncation level lam, then raised to the power p.
Setting lam = inf recovers the ordinary p-th power cost, so one code path
serves both the robust and the classical problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["CostSpec", "CostMatrix", "truncated_cost", "pairwise_cost", "cost_matrix"]


@dataclass(frozen=True)
class CostSpec:
    """Ground metric, exponent p >= 1, and truncation level lam > 0."""

    ground: str = "euclidean"
    p: float = 2.0
    lam: float = math.inf

    def __post_init__(self):
        if self.ground != "euclidean":
            raise ValueError(f"unsupported ground metric {self.ground!r}")
        p = float(self.p)
        lam = float(self.lam)
        if not (p >= 1.0 and math.isfinite(p)):
            raise ValueError(f"exponent p must be finite and >= 1, got {self.p!r}")
        if not (lam > 0.0):
            raise ValueError(f"truncation level must be positive, got {self.lam!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "lam", lam)

    @property
    def truncates(self) -> bool:
        """Whether the cap is finite (the cost actually saturates)."""
        return math.isfinite(self.lam)


@dataclass(frozen=True)
class CostMatrix:
    """Dense cost entries together with the spec that produced them."""

    entries: np.ndarray
    spec: CostSpec


def _power(vals: np.ndarray, p: float) -> np.ndarray:
    # p = 1 and p = 2 cover every solver in the package; avoid the generic
    # pow for those so cost assembly stays exact and fast.
    if p == 1.0:
        return vals
    if p == 2.0:
        return vals * vals
    return np.power(vals, p)


def truncated_cost(x, y, spec: CostSpec) -> float:
    """min{ |x - y|, lam }**p for a single pair of points."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"point dims differ: {x.shape[0]} vs {y.shape[0]}")
    d = min(float(np.linalg.norm(x - y)), spec.lam)
    return float(_power(np.float64(d), spec.p))


def pairwise_cost(xs, ys, spec: CostSpec) -> np.ndarray:
    """Dense (R, S) matrix of truncated costs between two point stacks."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs.reshape(-1, 1)
    if ys.ndim == 1:
        ys = ys.reshape(-1, 1)
    d = cdist(xs, ys)
    if spec.truncates:
        np.minimum(d, spec.lam, out=d)
    return _power(d, spec.p)


def cost_matrix(a, b, spec: CostSpec) -> CostMatrix:
    """Cost matrix between two measures' supports (rows a, columns b)."""
    if a.dim != b.dim:
        raise ValueError(f"measures live in different dims: {a.dim} vs {b.dim}")
    return CostMatrix(pairwise_cost(a.points, b.points, spec), spec)
