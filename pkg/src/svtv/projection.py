"""Euclidean projections onto l1, l2 and l-infinity balls around a centre."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import is_uniform, parse_shape


@dataclass(frozen=True)
class BallSpec:
    q: float
    radius: float
    center: np.ndarray | float = 0.0

    def __post_init__(self):
        q = parse_shape(self.q)
        if q not in (1.0, 2.0) and not is_uniform(q):
            raise ValueError(f"only q in {{1, 2, inf}} is supported, got {self.q}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "q", q)


def l1_threshold(v: np.ndarray, radius: float) -> float:
    """``tau >= 0`` with ``sum(max(|v| - tau, 0)) = radius`` (0 when already inside)."""
    a = np.abs(np.ravel(v))
    if a.sum() <= radius:
        return 0.0
    s = np.sort(a)[::-1]
    cums = np.cumsum(s)
    k = np.arange(1, s.size + 1)
    taus = (cums - radius) / k
    # largest k whose threshold still leaves the k-th entry positive
    idx = np.nonzero(s > taus)[0][-1]
    return float(taus[idx])


def project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if np.abs(v).sum() <= radius:
        return v.copy()
    tau = l1_threshold(v, radius)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def project_l2(v: np.ndarray, radius: float) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = math.sqrt(float(np.sum(v * v)))
    if norm <= radius:
        return v.copy()
    return v * (radius / norm)


def project_linf(v: np.ndarray, radius: float) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=np.float64), -radius, radius)


def project_ball(y: np.ndarray, spec: BallSpec) -> np.ndarray:
    """Nearest point to ``y`` in ``{x : ||x - center||_q <= radius}``."""
    y = np.asarray(y, dtype=np.float64)
    center = np.asarray(spec.center, dtype=np.float64)
    if center.ndim and center.shape != y.shape:
        raise ValueError(f"center shape {center.shape} does not match {y.shape}")
    v = y - center
    if spec.q == 1.0:
        out = project_l1(v, spec.radius)
    elif spec.q == 2.0:
        out = project_l2(v, spec.radius)
    else:
        out = project_linf(v, spec.radius)
    return center + out


def ball_norm(v: np.ndarray, q: float) -> float:
    v = np.abs(np.ravel(np.asarray(v, dtype=np.float64)))
    if is_uniform(q):
        return float(v.max(initial=0.0))
    if q == 1.0:
        return float(v.sum())
    if q == 2.0:
        return math.sqrt(float(np.sum(v * v)))
    return float(np.sum(v**q) ** (1.0 / q))
