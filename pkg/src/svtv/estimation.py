"""Maximum-likelihood hyperparameter maps over square neighbourhoods.

Each pixel ``i`` looks at the ``m = (2r+1)^2`` gradients of its window (edge
replicated at the border). The scale ``alpha`` always has a closed form given
the remaining parameters, so only the profile objective in ``p`` (WTVpSV) or
``(p, theta, a)`` (WDTVpSV) is searched numerically: first on fixed grids,
then by golden-section refinement around the best grid point.

A small ``eps_reg`` is added to every window mean of powers so that flat
windows give finite (large) scales instead of divisions by zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from ._search import golden_minimize
from .errors import ConfigError
from .imagecore import gradient
from .regularizers import ParamMaps, RegKind

_CHUNK = 4096
_HALF_PI = math.pi / 2


@dataclass(frozen=True)
class EstimationConfig:
    radius: int = 1
    eps_reg: float = 1e-6
    p_min: float = 0.5
    p_max: float = 2.0
    a_floor: float = 1e-2
    grid_p: int = 64
    grid_theta: int = 90
    grid_a: int = 32
    cond_limit: float = 1e8
    sweeps: int = 4
    golden_iters: int = 40

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 1:
            raise ConfigError(f"radius must be an integer >= 1, got {self.radius}")
        if not 0 < self.p_min < self.p_max:
            raise ConfigError(f"need 0 < p_min < p_max, got [{self.p_min}, {self.p_max}]")
        if not 0 < self.a_floor <= 1:
            raise ConfigError(f"a_floor must lie in (0, 1], got {self.a_floor}")
        if self.eps_reg < 0:
            raise ConfigError("eps_reg must be nonnegative")
        if min(self.grid_p, self.grid_theta, self.grid_a) < 2:
            raise ConfigError("grid sizes must be at least 2")

    @property
    def window_size(self) -> int:
        return (2 * self.radius + 1) ** 2

    def p_grid(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.grid_p)

    def theta_grid(self) -> np.ndarray:
        return -_HALF_PI + math.pi * np.arange(self.grid_theta) / self.grid_theta

    def a_grid(self) -> np.ndarray:
        return np.linspace(self.a_floor, 1.0, self.grid_a)


# ---------------------------------------------------------------------------
# window helpers


def _magnitudes(field) -> np.ndarray:
    field = np.asarray(field, dtype=np.float64)
    if field.ndim == 3 and field.shape[0] == 2:
        return np.hypot(field[0], field[1])
    if field.ndim != 2:
        raise ValueError("expected a magnitude map (n1, n2) or a gradient field (2, n1, n2)")
    return field


def local_power_sums(field, radius: int, p: float = 1.0) -> np.ndarray:
    """Window sums of ``|g_j|^p`` over ``(2r+1) x (2r+1)`` neighbourhoods.

    ``field`` is a magnitude map or a gradient field (whose pointwise norms
    are used). Windows are padded by edge replication.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    mags = _magnitudes(field)
    vals = mags if p == 1 else _pow(mags, p)
    size = 2 * radius + 1
    padded = np.pad(vals, radius, mode="edge")
    # summed-area table keeps the sums exact up to rounding of the partial sums
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    sat[1:, 1:] = padded.cumsum(0).cumsum(1)
    n1, n2 = mags.shape
    return (sat[size:size + n1, size:size + n2] - sat[:n1, size:size + n2]
            - sat[size:size + n1, :n2] + sat[:n1, :n2])


def windows(values: np.ndarray, radius: int) -> np.ndarray:
    """Stack the edge-padded window of every pixel: shape ``(n1*n2, m)``."""
    padded = np.pad(np.asarray(values, dtype=np.float64), radius, mode="edge")
    size = 2 * radius + 1
    view = sliding_window_view(padded, (size, size))
    return view.reshape(-1, size * size)


def _pow(x, p):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(p * np.log(np.where(x > 0, x, 1.0))), 0.0)


# ---------------------------------------------------------------------------
# WTV


def estimate_wtv_alpha(field, cfg: EstimationConfig = EstimationConfig()) -> np.ndarray:
    """``alpha_i = 1 / (mean of |g_j| over the window + eps_reg)``."""
    mags = _magnitudes(field)
    mean = local_power_sums(mags, cfg.radius) / cfg.window_size
    return 1.0 / (mean + cfg.eps_reg)


# ---------------------------------------------------------------------------
# WTVpSV


def wtvp_objective(mean_power, p, m: int):
    """Profile negative log-likelihood ``G(p)`` of a window of ``m`` magnitudes.

    ``mean_power`` is the (regularized) window mean of ``|g|^p``.
    """
    p = np.asarray(p, dtype=np.float64)
    return (m / p) * (np.log(p * mean_power) + 1.0) + m * special.gammaln(1.0 + 1.0 / p)


def wtvp_alpha(mean_power, p):
    return (p * mean_power) ** (-1.0 / p)


def _fit_wtvp(mean_power_at, mean_power_pointwise, n: int, m: int, cfg: EstimationConfig):
    grid = cfg.p_grid()
    best_g = np.full(n, np.inf)
    best_k = np.zeros(n, dtype=int)
    for k, pk in enumerate(grid):
        g = wtvp_objective(mean_power_at(pk), pk, m)
        better = g < best_g
        best_g[better], best_k[better] = g[better], k
    lo = grid[np.maximum(best_k - 1, 0)]
    hi = grid[np.minimum(best_k + 1, len(grid) - 1)]

    def fun(p):
        return wtvp_objective(mean_power_pointwise(p), p, m)

    p_ref, g_ref = golden_minimize(fun, lo, hi, iters=cfg.golden_iters)
    p = np.where(g_ref < best_g, p_ref, grid[best_k])
    p = np.clip(p, cfg.p_min, cfg.p_max)
    return p, wtvp_alpha(mean_power_pointwise(p), p)


def fit_wtvp_windows(samples, cfg: EstimationConfig = EstimationConfig()):
    """Fit ``(alpha, p)`` to each row of ``samples`` (shape ``(n, m)`` of magnitudes)."""
    w = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n, m = w.shape
    logw = np.log(np.where(w > 0, w, 1.0))
    pos = w > 0

    def pointwise(p):
        p = np.broadcast_to(np.asarray(p, dtype=np.float64), (n,))
        vals = np.where(pos, np.exp(p[:, None] * logw), 0.0)
        return vals.mean(axis=1) + cfg.eps_reg

    p, alpha = _fit_wtvp(pointwise, pointwise, n, m, cfg)
    return alpha, p


def estimate_wtvp(field, cfg: EstimationConfig = EstimationConfig()):
    """Per-pixel ``(alpha, p)`` maps for the WTVpSV model."""
    mags = _magnitudes(field)
    shape = mags.shape
    m = cfg.window_size
    n = mags.size

    def at_grid(p):
        return (local_power_sums(mags, cfg.radius, p) / m).ravel() + cfg.eps_reg

    win = windows(mags, cfg.radius)
    logw = np.log(np.where(win > 0, win, 1.0))
    pos = win > 0

    def pointwise(p):
        out = np.empty(n)
        for s in range(0, n, _CHUNK):
            e = slice(s, s + _CHUNK)
            vals = np.where(pos[e], np.exp(p[e, None] * logw[e]), 0.0)
            out[e] = vals.mean(axis=1)
        return out + cfg.eps_reg

    p, alpha = _fit_wtvp(at_grid, pointwise, n, m, cfg)
    return alpha.reshape(shape), p.reshape(shape)


# ---------------------------------------------------------------------------
# WDTVpSV


def wdtvp_objective(g1, g2, p, theta, a, eps_reg: float = 1e-6):
    """Profile negative log-likelihood ``G(p, theta, a)`` of gradient windows.

    ``g1``, ``g2`` have shape ``(n, m)``; ``p``, ``theta``, ``a`` broadcast
    against ``(n,)``. Constant terms are kept so values are comparable with the
    full likelihood.
    """
    g1 = np.atleast_2d(g1)
    g2 = np.atleast_2d(g2)
    m = g1.shape[1]
    p = np.asarray(p, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    q2 = _quadratic_form(g1 * g1, g2 * g2, g1 * g2, theta[..., None], a[..., None])
    mean_power = _pow(q2, p[..., None] / 2.0).mean(axis=-1) + eps_reg
    return _wdtvp_profile(mean_power, p, a, m)


def _quadratic_form(s11, s22, s12, theta, a):
    # ||diag(1, a) R_-theta g||^2 written with the products of g's components
    c, s = np.cos(theta), np.sin(theta)
    a2 = a * a
    return (c * c + a2 * s * s) * s11 + (s * s + a2 * c * c) * s22 + 2.0 * (1.0 - a2) * c * s * s12


def _wdtvp_profile(mean_power, p, a, m):
    # negative log-likelihood of the normalized density at the optimal alpha
    return m * (math.log(2.0 * math.pi) + special.gammaln(2.0 / p + 1.0) - math.log(2.0) - np.log(a)
                + (2.0 / p) * (np.log(0.5 * p * mean_power) + 1.0))


def wdtvp_alpha(mean_power, p):
    return (0.5 * p * mean_power) ** (-1.0 / p)


def _wrap_angle(theta):
    return (np.asarray(theta) + _HALF_PI) % math.pi - _HALF_PI


def moment_orientation(g1, g2):
    """Closed-form Gaussian (p = 2) fit of each window.

    Returns ``(theta, a, cond)``: ``theta`` points along the eigenvector of the
    window second-moment matrix with the smallest eigenvalue (the direction of
    strongest penalty), ``a = sqrt(lambda_min / lambda_max)`` and the condition
    number ``lambda_max / lambda_min`` (``inf`` for rank-deficient windows).
    """
    m11 = np.mean(g1 * g1, axis=-1)
    m22 = np.mean(g2 * g2, axis=-1)
    m12 = np.mean(g1 * g2, axis=-1)
    half_tr = 0.5 * (m11 + m22)
    rad = np.hypot(0.5 * (m11 - m22), m12)
    lmax = half_tr + rad
    lmin = np.maximum(half_tr - rad, 0.0)
    major = 0.5 * np.arctan2(2.0 * m12, m11 - m22)
    theta = _wrap_angle(major + _HALF_PI)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lmin > 0, lmax / np.where(lmin > 0, lmin, 1.0), np.inf)
        a = np.sqrt(np.where(lmax > 0, lmin / np.where(lmax > 0, lmax, 1.0), 1.0))
    return theta, a, cond, lmax


class _WdtvpBatch:
    """Objective evaluations for a batch of windows with cached products."""

    def __init__(self, g1, g2, eps_reg):
        self.s11 = g1 * g1
        self.s22 = g2 * g2
        self.s12 = g1 * g2
        self.m = g1.shape[1]
        self.eps = eps_reg

    def q2(self, theta, a):
        return _quadratic_form(self.s11, self.s22, self.s12, theta[..., None], a[..., None])

    def mean_power(self, q2, p):
        return _pow(q2, p[..., None] / 2.0).mean(axis=-1) + self.eps

    def value(self, p, theta, a):
        return _wdtvp_profile(self.mean_power(self.q2(theta, a), p), p, a, self.m)

    def scan_p(self, grid, theta, a):
        # rows: pixels, columns: grid values
        logq = np.log(np.maximum(self.q2(theta, a), 1e-300))
        zero = self.q2(theta, a) <= 0
        out = np.empty((len(theta), len(grid)))
        for k, pk in enumerate(grid):
            vals = np.where(zero, 0.0, np.exp(0.5 * pk * logq))
            out[:, k] = _wdtvp_profile(vals.mean(axis=-1) + self.eps, pk, a, self.m)
        return out

    def scan_theta(self, grid, p, a):
        out = np.empty((len(p), len(grid)))
        for k, tk in enumerate(grid):
            t = np.full_like(p, tk)
            out[:, k] = self.value(p, t, a)
        return out

    def scan_a(self, grid, p, theta):
        out = np.empty((len(p), len(grid)))
        for k, ak in enumerate(grid):
            out[:, k] = self.value(p, theta, np.full_like(p, ak))
        return out


def _fit_wdtvp_batch(g1, g2, cfg: EstimationConfig):
    n = g1.shape[0]
    batch = _WdtvpBatch(g1, g2, cfg.eps_reg)
    theta, a, cond, lmax = moment_orientation(g1, g2)
    a = np.clip(a, cfg.a_floor, 1.0)
    empty = lmax <= 0
    degenerate = ~empty & (cond > cfg.cond_limit)
    theta = np.where(empty, 0.0, theta)
    a = np.where(empty, 1.0, np.where(degenerate, cfg.a_floor, a))
    free = ~(empty | degenerate)

    p_grid, t_grid, a_grid = cfg.p_grid(), cfg.theta_grid(), cfg.a_grid()
    vals = batch.scan_p(p_grid, theta, a)
    k = vals.argmin(axis=1)
    p = p_grid[k]
    best = vals[np.arange(n), k]

    for _ in range(cfg.sweeps if free.any() else 0):
        changed = np.zeros(n, dtype=bool)
        for name, grid in (("theta", t_grid), ("a", a_grid), ("p", p_grid)):
            if name == "theta":
                vals = batch.scan_theta(grid, p, a)
            elif name == "a":
                vals = batch.scan_a(grid, p, theta)
            else:
                vals = batch.scan_p(grid, theta, a)
            k = vals.argmin(axis=1)
            cand = vals[np.arange(n), k]
            take = free & (cand < best)
            if name == "theta":
                theta = np.where(take, grid[k], theta)
            elif name == "a":
                a = np.where(take, grid[k], a)
            else:
                p = np.where(take, grid[k], p)
            best = np.where(take, cand, best)
            changed |= take
        if not changed.any():
            break

    # golden refinement, one coordinate at a time within one grid step
    dp = p_grid[1] - p_grid[0]
    dt = t_grid[1] - t_grid[0]
    da = a_grid[1] - a_grid[0]
    for _ in range(2):
        x, fx = golden_minimize(lambda v: batch.value(v, theta, a),
                                np.maximum(p - dp, cfg.p_min), np.minimum(p + dp, cfg.p_max),
                                iters=cfg.golden_iters)
        take = fx < best
        p, best = np.where(take, x, p), np.where(take, fx, best)
        if not free.any():
            break
        x, fx = golden_minimize(lambda v: batch.value(p, v, a), theta - dt, theta + dt,
                                iters=cfg.golden_iters)
        take = free & (fx < best)
        theta, best = np.where(take, _wrap_angle(x), theta), np.where(take, fx, best)
        x, fx = golden_minimize(lambda v: batch.value(p, theta, v),
                                np.maximum(a - da, cfg.a_floor), np.minimum(a + da, 1.0),
                                iters=cfg.golden_iters)
        take = free & (fx < best)
        a, best = np.where(take, x, a), np.where(take, fx, best)

    p = np.clip(p, cfg.p_min, cfg.p_max)
    a = np.clip(a, cfg.a_floor, 1.0)
    theta = _wrap_angle(theta)
    alpha = wdtvp_alpha(batch.mean_power(batch.q2(theta, a), p), p)
    return alpha, p, theta, a


def fit_wdtvp_windows(g1, g2, cfg: EstimationConfig = EstimationConfig()):
    """Fit ``(alpha, p, theta, a)`` to each row of the windows ``g1``, ``g2`` (``(n, m)``)."""
    g1 = np.atleast_2d(np.asarray(g1, dtype=np.float64))
    g2 = np.atleast_2d(np.asarray(g2, dtype=np.float64))
    if g1.shape != g2.shape:
        raise ValueError("component windows must have the same shape")
    n = g1.shape[0]
    out = [np.empty(n) for _ in range(4)]
    # keep the (pixels x grid x window) temporaries around a few megabytes
    chunk = max(1, _CHUNK * 16 // max(g1.shape[1], 1))
    for s in range(0, n, chunk):
        e = slice(s, s + chunk)
        for dst, src in zip(out, _fit_wdtvp_batch(g1[e], g2[e], cfg)):
            dst[e] = src
    return tuple(out)


def estimate_wdtvp(field, cfg: EstimationConfig = EstimationConfig()):
    """Per-pixel ``(alpha, p, theta, a)`` maps from a gradient field ``(2, n1, n2)``."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3 or field.shape[0] != 2:
        raise ValueError("estimate_wdtvp needs a gradient field of shape (2, n1, n2)")
    shape = field.shape[1:]
    g1 = windows(field[0], cfg.radius)
    g2 = windows(field[1], cfg.radius)
    return tuple(x.reshape(shape) for x in fit_wdtvp_windows(g1, g2, cfg))


# ---------------------------------------------------------------------------
# dispatch


def estimate_maps(kind, u: np.ndarray, cfg: EstimationConfig = EstimationConfig(),
                  boundary: str = "neumann") -> ParamMaps:
    """Hyperparameter maps of ``kind`` estimated from the image ``u``.

    The space-invariant kinds pool every pixel of the image into one sample.
    """
    kind = RegKind.parse(kind)
    field = gradient(u, boundary)
    shape = field.shape[1:]
    if kind is RegKind.WTV:
        return ParamMaps(estimate_wtv_alpha(field, cfg))
    if kind is RegKind.WTVP:
        alpha, p = estimate_wtvp(field, cfg)
        return ParamMaps(alpha, p)
    if kind is RegKind.WDTVP:
        alpha, p, theta, a = estimate_wdtvp(field, cfg)
        return ParamMaps(alpha, p, theta, a)
    mags = np.hypot(field[0], field[1]).ravel()
    if kind is RegKind.TV:
        return ParamMaps.constant(shape, alpha=1.0 / (mags.mean() + cfg.eps_reg))
    alpha, p = fit_wtvp_windows(mags[None, :], cfg)
    return ParamMaps.constant(shape, alpha=alpha[0], p=p[0])
