"""Restoration quality scores: ISNR in decibels and mean SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be a positive odd size, got {self.window}")
        for name in ("sigma", "k1", "k2", "data_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def kernel(self) -> np.ndarray:
        half = self.window // 2
        x = np.arange(-half, half + 1, dtype=np.float64)
        g = np.exp(-(x * x) / (2.0 * self.sigma**2))
        k = np.outer(g, g)
        return k / k.sum()


def _check_pair(*arrays):
    shape = np.shape(arrays[0])
    for arr in arrays[1:]:
        if np.shape(arr) != shape:
            raise ValueError(f"shape mismatch: {shape} vs {np.shape(arr)}")
    return [np.asarray(a, dtype=np.float64) for a in arrays]


def isnr(b, u, u_star) -> float:
    """``10 log10(||b - u||^2 / ||u_star - u||^2)``; ``inf`` when ``u_star == u``.

    ``b`` is the degraded observation, ``u`` the ground truth and ``u_star``
    the restoration.
    """
    b, u, u_star = _check_pair(b, u, u_star)
    err = float(np.sum((u_star - u) ** 2))
    if err == 0.0:
        return math.inf
    ref = float(np.sum((b - u) ** 2))
    if ref == 0.0:
        return -math.inf
    return 10.0 * math.log10(ref / err)


def ssim_map(x, y, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    """Local SSIM over every full window position (no padding)."""
    x, y = _check_pair(x, y)
    if x.ndim != 2:
        raise ValueError("ssim expects 2-D images")
    if min(x.shape) < cfg.window:
        raise ValueError(f"images must be at least {cfg.window}x{cfg.window}")
    w = cfg.kernel()

    def filt(z):
        return convolve2d(z, w, mode="valid")

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    c1 = (cfg.k1 * cfg.data_range) ** 2
    c2 = (cfg.k2 * cfg.data_range) ** 2
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(x, y, cfg: SsimConfig = SsimConfig()) -> float:
    return float(np.mean(ssim_map(x, y, cfg)))
