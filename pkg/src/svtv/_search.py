"""Vectorized golden-section search used by the estimators and the prox."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(fun: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
                    iters: int = 60, xtol: float = 0.0):
    """Minimize ``fun`` independently on each interval ``[lo_k, hi_k]``.

    ``fun`` maps an array of abscissae (one per interval) to the objective
    values. Returns ``(x, fx)`` where ``x`` is the best point seen, the two
    endpoints included.
    """
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    best_x = lo.copy()
    best_f = fun(lo)
    f_hi = fun(hi)
    take = f_hi < best_f
    best_x[take], best_f[take] = hi[take], f_hi[take]

    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(iters):
        left = f1 <= f2
        # keep [lo, x2] where f1 <= f2, else [x1, hi]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        # one fresh evaluation per interval: the new left probe or the new right one
        fresh = np.where(left, hi - _INV_PHI * (hi - lo), lo + _INV_PHI * (hi - lo))
        f_fresh = fun(fresh)
        x1, x2, f1, f2 = (np.where(left, fresh, x2), np.where(left, x1, fresh),
                          np.where(left, f_fresh, f2), np.where(left, f1, f_fresh))
        if xtol > 0 and np.all(hi - lo <= xtol):
            break
    for x, f in ((x1, f1), (x2, f2)):
        take = f < best_f
        best_x[take], best_f[take] = x[take], f[take]
    return best_x, best_f
