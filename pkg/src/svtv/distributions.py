"""Generalized Gaussian densities, noise sampling and the discrepancy radius.

Scale conventions follow the density

    GG(x | eta, gamma, s) = gamma * s / (2 Gamma(1/s)) * exp(-(gamma |x - eta|)^s)

so ``gamma`` is an inverse length. The uniform limit ``s -> inf`` is handled
as its own case wherever a shape may be infinite (see :func:`is_uniform`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError

INF = math.inf


def is_uniform(q: float) -> bool:
    """True for the uniform (``q = inf``) noise case."""
    return math.isinf(q)


def parse_shape(value) -> float:
    """Accept ``inf``/``infinity``/``uniform`` or a positive number."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "uniform", "+inf"):
            return INF
        value = float(text)
    q = float(value)
    if not q > 0:
        raise ConfigError(f"shape must be positive, got {value}")
    return q


def _check_positive(**kwargs) -> None:
    for name, v in kwargs.items():
        if not np.all(np.asarray(v) > 0):
            raise ValueError(f"{name} must be positive, got {v}")


# ---------------------------------------------------------------------------
# gamma function family


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``."""
    _check_positive(x=x)
    return special.gammaln(x)


def gamma_function(x):
    _check_positive(x=x)
    return special.gamma(x)


def incomplete_gamma_lower(x, y):
    """Unregularized lower incomplete gamma ``int_0^y t^(x-1) e^-t dt``."""
    _check_positive(x=x)
    if np.any(np.asarray(y) < 0):
        raise ValueError("y must be nonnegative")
    return special.gammainc(x, y) * special.gamma(x)


def incomplete_gamma_upper(x, y):
    """Unregularized upper incomplete gamma ``int_y^inf t^(x-1) e^-t dt``."""
    _check_positive(x=x)
    if np.any(np.asarray(y) < 0):
        raise ValueError("y must be nonnegative")
    return special.gammaincc(x, y) * special.gamma(x)


# ---------------------------------------------------------------------------
# univariate generalized Gaussian


def gg_pdf(x, eta: float, gamma: float, s: float):
    _check_positive(gamma=gamma, s=s)
    d = np.abs(np.asarray(x, dtype=np.float64) - eta)
    if is_uniform(s):
        return np.where(d <= 1.0 / gamma, gamma / 2.0, 0.0)
    log_norm = math.log(gamma / 2.0) + math.log(s) - special.gammaln(1.0 / s)
    return np.exp(log_norm - (gamma * d) ** s)


def gg_cdf(x, eta: float, gamma: float, s: float):
    _check_positive(gamma=gamma, s=s)
    z = np.asarray(x, dtype=np.float64) - eta
    if is_uniform(s):
        return np.clip(0.5 + 0.5 * gamma * z, 0.0, 1.0)
    return 0.5 + 0.5 * np.sign(z) * special.gammainc(1.0 / s, (gamma * np.abs(z)) ** s)


def hgg_pdf(x, gamma: float, s: float):
    """Density of ``|Y|`` with ``Y ~ GG(0, gamma, s)``; zero for ``x < 0``."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 2.0 * gg_pdf(x, 0.0, gamma, s), 0.0)


def hl_pdf(x, gamma: float):
    """Half-Laplace density ``gamma exp(-gamma x)`` on ``x >= 0``."""
    return hgg_pdf(x, gamma, 1.0)


def gg_std_from_scale(gamma: float, s: float) -> float:
    _check_positive(gamma=gamma, s=s)
    if is_uniform(s):
        return 1.0 / (gamma * math.sqrt(3.0))
    return math.exp(0.5 * (special.gammaln(3.0 / s) - special.gammaln(1.0 / s))) / gamma


def gg_scale_from_std(sigma: float, s: float) -> float:
    _check_positive(sigma=sigma, s=s)
    if is_uniform(s):
        return 1.0 / (sigma * math.sqrt(3.0))
    return math.exp(0.5 * (special.gammaln(3.0 / s) - special.gammaln(1.0 / s))) / sigma


def gg_sample(eta: float, gamma: float, s: float, n, seed=None) -> np.ndarray:
    """Draw GG variates as ``eta + sign * G**(1/s) / gamma`` with ``G ~ Gamma(1/s, 1)``.

    ``n`` may be an int or a shape tuple. ``seed`` is anything accepted by
    :func:`numpy.random.default_rng` (including a Generator).
    """
    _check_positive(gamma=gamma, s=s)
    rng = np.random.default_rng(seed)
    if is_uniform(s):
        return eta + rng.uniform(-1.0, 1.0, size=n) / gamma
    mag = rng.gamma(1.0 / s, 1.0, size=n) ** (1.0 / s)
    sign = np.where(rng.random(size=n) < 0.5, -1.0, 1.0)
    return eta + sign * mag / gamma


# ---------------------------------------------------------------------------
# bivariate generalized Gaussian


@dataclass(frozen=True)
class BggParams:
    """Per-pixel prior parameters: scale, shape, orientation and anisotropy."""

    alpha: float
    p: float
    theta: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.p > 0:
            raise ValueError("alpha and p must be positive")
        if not -math.pi / 2 <= self.theta < math.pi / 2:
            raise ValueError(f"theta must lie in [-pi/2, pi/2), got {self.theta}")
        if not 0 < self.a <= 1:
            raise ValueError(f"a must lie in (0, 1], got {self.a}")


def to_frame(g1, g2, theta):
    """Components of ``R_{-theta} (g1, g2)``: rotate clockwise by ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return c * g1 + s * g2, -s * g1 + c * g2


def from_frame(z1, z2, theta):
    """Components of ``R_theta (z1, z2)``; inverse of :func:`to_frame`."""
    c, s = np.cos(theta), np.sin(theta)
    return c * z1 - s * z2, s * z1 + c * z2


def anisotropic_norm(g1, g2, theta, a):
    """``|| diag(1, a) R_{-theta} g ||_2``."""
    z1, z2 = to_frame(g1, g2, theta)
    return np.hypot(z1, a * z2)


def bgg_log_norm(alpha, p, a):
    """Log of ``a p alpha^2 / (2 pi Gamma(2/p))``, the factor that makes
    ``exp(-(alpha ||diag(1, a) R_-theta y||)^p)`` integrate to one."""
    return (np.log(a) + np.log(p) + 2.0 * np.log(alpha) - math.log(2.0 * math.pi)
            - special.gammaln(2.0 / p))


def bgg_pdf(y, params: BggParams):
    """Density at ``y`` (shape ``(2, ...)``) of the reparametrized bivariate GG."""
    y = np.asarray(y, dtype=np.float64)
    q = anisotropic_norm(y[0], y[1], params.theta, params.a)
    return np.exp(bgg_log_norm(params.alpha, params.p, params.a) - (params.alpha * q) ** params.p)


def bgg_sample(params: BggParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` points, returned with shape ``(n, 2)``.

    An isotropic point ``z`` with density proportional to ``exp(-||z||^p)`` has
    ``||z||^p ~ Gamma(2/p, 1)`` and a uniform angle; mapping it through
    ``R_theta diag(1, 1/a) / alpha`` gives the target law.
    """
    rng = np.random.default_rng(seed)
    radius = rng.gamma(2.0 / params.p, 1.0, size=n) ** (1.0 / params.p)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=n)
    z1 = radius * np.cos(phi) / params.alpha
    z2 = radius * np.sin(phi) / (params.alpha * params.a)
    y1, y2 = from_frame(z1, z2, params.theta)
    return np.stack([y1, y2], axis=1)


# ---------------------------------------------------------------------------
# noise model and discrepancy principle


@dataclass(frozen=True)
class NoiseModel:
    """Additive i.i.d. GG noise of shape ``q`` and standard deviation ``sigma``."""

    q: float
    sigma: float
    tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "q", parse_shape(self.q))
        if not self.sigma > 0:
            raise ConfigError(f"noise sigma must be positive, got {self.sigma}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not is_uniform(self.q) and self.q < 1:
            raise ConfigError(f"noise shape q must be >= 1 or inf, got {self.q}")

    @classmethod
    def from_scale(cls, q, omega: float, tau: float = 1.0) -> "NoiseModel":
        q = parse_shape(q)
        return cls(q, gg_std_from_scale(omega, q), tau)

    @property
    def omega(self) -> float:
        return gg_scale_from_std(self.sigma, self.q)

    def radius(self, m: int) -> float:
        return gdp_radius(m, self.q, self.omega, self.tau)

    def sample(self, shape, seed=None) -> np.ndarray:
        return gg_sample(0.0, self.omega, self.q, shape, seed)


def gdp_radius(m: int, q: float, omega: float, tau: float = 1.0) -> float:
    """Expected ``l_q`` norm of ``m`` noise samples times ``tau``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    _check_positive(omega=omega, tau=tau)
    if is_uniform(q):
        return tau / omega
    return tau * (m / q) ** (1.0 / q) / omega
