"""Synthetic piecewise-constant test images."""

from __future__ import annotations

import numpy as np


def geometric(n: int = 64) -> np.ndarray:
    """An ``n x n`` image in [0, 1] with a rectangle, a disc, a triangle and a ring.

    Edges run horizontally, vertically and obliquely so that every
    regularizer has something to align with.
    """
    if n < 8:
        raise ValueError("n must be at least 8")
    y, x = np.mgrid[0:n, 0:n] / n
    u = np.full((n, n), 0.2)
    u[(x > 0.1) & (x < 0.45) & (y > 0.12) & (y < 0.4)] = 0.8
    u[(x - 0.7) ** 2 + (y - 0.3) ** 2 < 0.17**2] = 0.55
    u[(y > 0.55) & (y < 0.9) & (x > 0.1) & (x - 0.1 < (0.9 - y) * 1.1)] = 0.95
    ring = (x - 0.7) ** 2 + (y - 0.72) ** 2
    u[(ring < 0.2**2) & (ring > 0.1**2)] = 0.05
    return u
