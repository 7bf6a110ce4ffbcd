"""Proximal maps of the gradient penalties.

Every function works on a single 2-vector or on a whole field: ``w`` has
shape ``(2, ...)`` and the parameters broadcast against ``w[0]``. The map
solves

    argmin_g  f(g; theta) + beta/2 ||g - w||^2.

For ``p < 1`` the problem is non-convex and may have several minimizers; we
return the one with the smallest objective and, on exact ties, the one with
the smaller norm.
"""

from __future__ import annotations

import numpy as np

from .distributions import from_frame, to_frame
from .regularizers import RegKind, penalty_f

_CHUNK = 2048


# ---------------------------------------------------------------------------
# scalar shrinkage


def _radial_objective(t, n, bbar, p):
    return _pow(t, p) + 0.5 * bbar * (t - n) ** 2


def _pow(x, p):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(p * np.log(np.where(x > 0, x, 1.0))), 0.0)


def _newton_root(n, bbar, p, lo, hi, iters=100):
    # root of p t^(p-1) + bbar (t - n) on [lo, hi], where the derivative is increasing
    t = hi.copy()
    for _ in range(iters):
        tp = np.maximum(t, 1e-300)
        d1 = p * np.exp((p - 1.0) * np.log(tp)) + bbar * (t - n)
        d2 = p * (p - 1.0) * np.exp((p - 2.0) * np.log(tp)) + bbar
        hi = np.where(d1 > 0, t, hi)
        lo = np.where(d1 <= 0, t, lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = t - d1 / d2
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi) | (d2 <= 0)
        new = np.where(bad, 0.5 * (lo + hi), step)
        if np.all(np.abs(new - t) <= 4e-16 * np.maximum(n, 1e-300)):
            t = new
            break
        t = new
    return t


def radial_shrink(n, bbar, p):
    """Minimize ``t^p + bbar/2 (t - n)^2`` over ``t in [0, n]``.

    ``n >= 0``, ``bbar > 0`` and ``p > 0`` are broadcastable arrays.
    """
    n, bbar, p = np.broadcast_arrays(np.asarray(n, dtype=np.float64),
                                     np.asarray(bbar, dtype=np.float64),
                                     np.asarray(p, dtype=np.float64))
    t = np.zeros(n.shape)
    pos = n > 0
    one = pos & (p == 1.0)
    t[one] = np.maximum(n[one] - 1.0 / bbar[one], 0.0)
    two = pos & (p == 2.0)
    t[two] = bbar[two] * n[two] / (2.0 + bbar[two])

    convex = pos & (p > 1.0) & (p != 2.0)
    if convex.any():
        nn, bb, pp = n[convex], bbar[convex], p[convex]
        t[convex] = _newton_root(nn, bb, pp, np.zeros_like(nn), nn.copy())

    concave = pos & (p < 1.0)
    if concave.any():
        nn, bb, pp = n[concave], bbar[concave], p[concave]
        # the derivative is smallest at the inflection point t0
        t0 = (pp * (1.0 - pp) / bb) ** (1.0 / (2.0 - pp))
        d0 = pp * t0 ** (pp - 1.0) + bb * (t0 - nn)
        inner = (t0 < nn) & (d0 < 0)
        root = np.zeros_like(nn)
        if inner.any():
            root[inner] = _newton_root(nn[inner], bb[inner], pp[inner], t0[inner], nn[inner].copy())
        keep = inner & (_radial_objective(root, nn, bb, pp) < 0.5 * bb * nn**2)
        t[concave] = np.where(keep, root, 0.0)
    return t


# ---------------------------------------------------------------------------
# isotropic penalties


def prox_wtv(w, alpha, beta):
    """Soft threshold of the vector norm: ``w * max(0, 1 - alpha / (beta ||w||))``."""
    w = np.asarray(w, dtype=np.float64)
    norm = np.hypot(w[0], w[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, np.maximum(0.0, 1.0 - alpha / (beta * np.where(norm > 0, norm, 1.0))), 0.0)
    return w * scale


def prox_wtvp(w, alpha, p, beta):
    """Prox of ``alpha^p ||g||^p``: a radial shrinkage of ``w``."""
    w = np.asarray(w, dtype=np.float64)
    alpha, p, beta = (np.broadcast_to(np.asarray(v, dtype=np.float64), w.shape[1:])
                      for v in (alpha, p, beta))
    norm = np.hypot(w[0], w[1])
    t = radial_shrink(norm, beta / alpha**p, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, t / np.where(norm > 0, norm, 1.0), 0.0)
    out = w * scale
    one = p == 1.0
    if np.any(one):
        out = np.where(one, prox_wtv(w, alpha, beta), out)
    return out


# ---------------------------------------------------------------------------
# anisotropic penalty


def arc_point(xi, wbar1, wbar2, a):
    """Second coordinate of the arc through 0 and ``(wbar1, wbar2)``.

    This is ``c2 xi / (xi - c1)`` with ``c1 = -a^2 wbar1 / (1 - a^2)`` and
    ``c2 = wbar2 / (1 - a^2)``, written so that it stays finite as ``a -> 1``
    (where the arc becomes the segment to ``wbar``).
    """
    return wbar2 * xi / ((1.0 - a * a) * xi + a * a * wbar1)


def hyperbola_centre(wbar1, wbar2, a):
    """``(c1, c2)`` of the rectangular hyperbola ``(z1-c1)(z2-c2) = c1 c2``."""
    d = 1.0 - a * a
    return -a * a * wbar1 / d, wbar2 / d


def _arc_objective(xi, wbar1, wbar2, a, bbar, p):
    z2 = arc_point(xi, wbar1, wbar2, a)
    h1 = xi * xi + (a * z2) ** 2
    return _pow(h1, 0.5 * p) + 0.5 * bbar * ((xi - wbar1) ** 2 + (z2 - wbar2) ** 2)


def _arc_slope(xi, wbar1, wbar2, a, bbar, p):
    # derivative of _arc_objective with respect to xi, for xi > 0
    a2 = a * a
    den = (1.0 - a2) * xi + a2 * wbar1
    z2 = wbar2 * xi / den
    dz2 = wbar2 * a2 * wbar1 / den**2
    h1 = xi * xi + a2 * z2 * z2
    dh1 = 2.0 * xi + 2.0 * a2 * z2 * dz2
    with np.errstate(divide="ignore", invalid="ignore"):
        reg = 0.5 * p * np.exp((0.5 * p - 1.0) * np.log(h1)) * dh1
    return reg + bbar * ((xi - wbar1) + (z2 - wbar2) * dz2)


def _bisect_slope(lo, hi, args, iters=64):
    # shrink [lo, hi] around a sign change of the slope; the objective is unimodal there
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = _arc_slope(mid, *args) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return 0.5 * (lo + hi)


def _arc_minimize(wbar1, wbar2, a, bbar, p, grid_n):
    """Minimize the arc objective over ``xi in [0, wbar1]`` for every entry.

    For ``p >= 1`` the objective is unimodal along the arc (the penalty is
    convex, so its minimum over nested ellipses first decreases then
    increases), and bisection on the slope over the whole interval is enough.
    For ``p < 1`` a grid locates the global basin first.
    """
    n = wbar1.shape[0]
    xi_out = np.empty(n)
    frac = np.linspace(0.0, 1.0, grid_n)
    step = frac[1]
    for s in range(0, n, _CHUNK):
        e = slice(s, s + _CHUNK)
        w1, w2, aa, bb, pp = (v[e] for v in (wbar1, wbar2, a, bbar, p))
        args = (w1, w2, aa, bb, pp)
        lo = np.zeros_like(w1)
        hi = w1.copy()
        best_xi = np.zeros_like(w1)
        best_f = _arc_objective(best_xi, *args)
        f_end = _arc_objective(w1, *args)
        take = f_end < best_f
        best_xi[take], best_f[take] = w1[take], f_end[take]

        rough = pp < 1.0
        if rough.any():
            sub = tuple(v[rough][:, None] for v in args)
            xi = sub[0] * frac[None, :]
            vals = _arc_objective(xi, *sub)
            k = vals.argmin(axis=1)
            rows = np.arange(len(k))
            g_xi, g_f = xi[rows, k], vals[rows, k]
            w1r = w1[rough]
            lo[rough] = np.maximum(g_xi - step * w1r, 0.0)
            hi[rough] = np.minimum(g_xi + step * w1r, w1r)
            better = g_f < best_f[rough]
            bx, bf = best_xi[rough], best_f[rough]
            bx[better], bf[better] = g_xi[better], g_f[better]
            best_xi[rough], best_f[rough] = bx, bf

        xi = _bisect_slope(lo, hi, args)
        f = _arc_objective(xi, *args)
        # ties go to the candidate found first, i.e. the smaller norm
        xi_out[e] = np.where(f < best_f, xi, best_xi)
    return xi_out


def prox_wdtvp(w, alpha, p, theta, a, beta, grid_n: int = 513):
    """Prox of ``alpha^p ||diag(1, a) R_-theta g||^p``.

    In the rotated frame the minimizer lies on the arc of a rectangular
    hyperbola joining the origin and ``|R_-theta w|``; the arc is searched by
    bisection on the slope, preceded by a ``grid_n``-point grid when
    ``p < 1`` (the only case with several local minima). When
    ``a = 1`` or one rotated component of ``w`` vanishes the arc degenerates to
    a segment and the scalar shrinkage is used instead.
    """
    w = np.asarray(w, dtype=np.float64)
    shape = w.shape[1:]
    alpha, p, theta, a, beta = (np.broadcast_to(np.asarray(v, dtype=np.float64), shape).ravel()
                                for v in (alpha, p, theta, a, beta))
    w1, w2 = to_frame(w[0].ravel(), w[1].ravel(), theta)
    s1, s2 = np.sign(w1), np.sign(w2)
    wb1, wb2 = np.abs(w1), np.abs(w2)
    bbar = beta / alpha**p

    z1 = np.zeros_like(wb1)
    z2 = np.zeros_like(wb2)
    iso = a == 1.0
    axis1 = ~iso & (wb2 == 0) & (wb1 > 0)
    axis2 = ~iso & (wb1 == 0) & (wb2 > 0)
    arc = ~iso & (wb1 > 0) & (wb2 > 0)

    z1[axis1] = radial_shrink(wb1[axis1], bbar[axis1], p[axis1])
    z2[axis2] = radial_shrink(wb2[axis2], bbar[axis2] / a[axis2] ** p[axis2], p[axis2])
    if arc.any():
        xi = _arc_minimize(wb1[arc], wb2[arc], a[arc], bbar[arc], p[arc], grid_n)
        z1[arc] = xi
        z2[arc] = arc_point(xi, wb1[arc], wb2[arc], a[arc])

    g1, g2 = from_frame(s1 * z1, s2 * z2, theta)
    out = np.stack([g1, g2]).reshape((2,) + shape)
    if iso.any():
        flat = w.reshape(2, -1)
        iso_out = prox_wtvp(flat[:, iso], alpha[iso], p[iso], beta[iso])
        out = out.reshape(2, -1)
        out[:, iso] = iso_out
        out = out.reshape((2,) + shape)
    return out


# ---------------------------------------------------------------------------
# dispatch and diagnostics


def prox(kind, w, beta, alpha=1.0, p=1.0, theta=0.0, a=1.0, grid_n: int = 513):
    """Prox of the penalty of ``kind``.

    The space-invariant kinds use their (constant) ``alpha`` as a weight, so
    TV behaves as WTV with a flat map and TVp as WTVpSV with flat maps.
    """
    kind = RegKind.parse(kind)
    if kind in (RegKind.TV, RegKind.WTV):
        return prox_wtv(w, alpha, beta)
    if kind in (RegKind.TVP, RegKind.WTVP):
        return prox_wtvp(w, alpha, p, beta)
    return prox_wdtvp(w, alpha, p, theta, a, beta, grid_n=grid_n)


def prox_objective(g, w, kind, beta, alpha=1.0, p=1.0, theta=0.0, a=1.0):
    """``f(g) + beta/2 ||g - w||^2`` with the weighted reading of :func:`prox`."""
    kind = RegKind.parse(kind)
    weighted = {RegKind.TV: RegKind.WTV, RegKind.TVP: RegKind.WTVP}.get(kind, kind)
    g = np.asarray(g, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    w = w.reshape(w.shape + (1,) * (g.ndim - w.ndim))
    return penalty_f(g, weighted, alpha, p, theta, a) + 0.5 * beta * ((g[0] - w[0]) ** 2 + (g[1] - w[1]) ** 2)


def prox_oracle(w, kind, beta, alpha=1.0, p=1.0, theta=0.0, a=1.0,
                grid_n: int = 801, half_width: float | None = None):
    """Brute-force minimizer over a ``grid_n x grid_n`` grid (for tests).

    The grid is centred at the origin and spans ``[-h, h]^2`` with
    ``h = 1.5 ||w||`` unless ``half_width`` is given. Returns ``(g, F(g))``.
    """
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    w = np.asarray(w, dtype=np.float64).reshape(2)
    h = 1.5 * float(np.hypot(*w)) if half_width is None else float(half_width)
    if h <= 0:
        return np.zeros(2), 0.0
    axis = np.linspace(-h, h, grid_n)
    g = np.stack(np.meshgrid(axis, axis, indexing="ij"))
    vals = prox_objective(g, w, kind, beta, alpha, p, theta, a)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return g[:, i, j].copy(), float(vals[i, j])


def prox_field(kind, beta, alpha=1.0, p=1.0, theta=0.0, a=1.0, grid_n: int = 21, extent: float = 1.0):
    """Sample ``e(w) = prox(w) - w`` on a ``grid_n x grid_n`` grid over ``[-extent, extent]^2``.

    Returns ``(w, e)``, both of shape ``(2, grid_n, grid_n)``.
    """
    axis = np.linspace(-extent, extent, grid_n)
    w = np.stack(np.meshgrid(axis, axis, indexing="xy"))
    out = prox(kind, w, beta, alpha, p, theta, a)
    return w, out - w
