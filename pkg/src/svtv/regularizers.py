"""Gradient penalties ``f`` and parameter penalties ``h`` for the five models.

==========  ==================================  =========================================
kind        f(g; theta)                          h(theta)
==========  ==================================  =========================================
TV          ||g||                               -(1/alpha) ln alpha
TVp         ||g||^p                             -(1/alpha^p) ln(alpha p / Gamma(1/p))
WTV         alpha ||g||                         -ln alpha
WTVpSV      alpha^p ||g||^p                     -ln(alpha p / Gamma(1/p))
WDTVpSV     alpha^p ||diag(1,a) R_-theta g||^p  -ln(a/(2 pi) p alpha^2 / (Gamma(2/p) 2^(2/p)))
==========  ==================================  =========================================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import anisotropic_norm, bgg_log_norm
from .errors import ConfigError
from .imagecore import gradient


class RegKind(str, enum.Enum):
    TV = "TV"
    TVP = "TVp"
    WTV = "WTV"
    WTVP = "WTVpSV"
    WDTVP = "WDTVpSV"

    @classmethod
    def parse(cls, text) -> "RegKind":
        if isinstance(text, cls):
            return text
        for kind in cls:
            if kind.value.lower() == str(text).strip().lower():
                return kind
        names = ", ".join(k.value for k in cls)
        raise ConfigError(f"unknown model kind {text!r}; expected one of {names}")

    @property
    def space_variant(self) -> bool:
        return self in (RegKind.WTV, RegKind.WTVP, RegKind.WDTVP)

    @property
    def fields(self) -> tuple[str, ...]:
        """Parameter maps that are active for this kind."""
        return {
            RegKind.TV: ("alpha",),
            RegKind.TVP: ("alpha", "p"),
            RegKind.WTV: ("alpha",),
            RegKind.WTVP: ("alpha", "p"),
            RegKind.WDTVP: ("alpha", "p", "theta", "a"),
        }[self]


@dataclass
class ParamMaps:
    """Per-pixel hyperparameters. Inactive maps keep their neutral values."""

    alpha: np.ndarray
    p: np.ndarray = field(default=None)
    theta: np.ndarray = field(default=None)
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        shape = self.alpha.shape
        self.p = np.ones(shape) if self.p is None else np.broadcast_to(np.asarray(self.p, dtype=np.float64), shape).copy()
        self.theta = np.zeros(shape) if self.theta is None else np.broadcast_to(np.asarray(self.theta, dtype=np.float64), shape).copy()
        self.a = np.ones(shape) if self.a is None else np.broadcast_to(np.asarray(self.a, dtype=np.float64), shape).copy()

    @classmethod
    def constant(cls, shape, alpha=1.0, p=1.0, theta=0.0, a=1.0) -> "ParamMaps":
        return cls(np.full(shape, float(alpha)), np.full(shape, float(p)),
                   np.full(shape, float(theta)), np.full(shape, float(a)))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.alpha.shape

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"alpha": self.alpha, "p": self.p, "theta": self.theta, "a": self.a}

    def validate(self, kind: RegKind | None = None) -> None:
        if not np.all(self.alpha > 0) or not np.all(np.isfinite(self.alpha)):
            raise ValueError("alpha map must be positive and finite")
        if not np.all(self.p > 0):
            raise ValueError("p map must be positive")
        if not np.all((self.theta >= -math.pi / 2) & (self.theta < math.pi / 2)):
            raise ValueError("theta map must lie in [-pi/2, pi/2)")
        if not np.all((self.a > 0) & (self.a <= 1)):
            raise ValueError("a map must lie in (0, 1]")

    def copy(self) -> "ParamMaps":
        return ParamMaps(self.alpha.copy(), self.p.copy(), self.theta.copy(), self.a.copy())


def _pow(x, p):
    # x**p with 0**p = 0 for every p > 0
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(p * np.log(np.where(x > 0, x, 1.0))), 0.0)


def penalty_f(g, kind, alpha=1.0, p=1.0, theta=0.0, a=1.0):
    """Gradient penalty for ``g`` of shape ``(2, ...)``; parameters broadcast."""
    kind = RegKind.parse(kind)
    g = np.asarray(g, dtype=np.float64)
    norm = np.hypot(g[0], g[1])
    if kind is RegKind.TV:
        return norm
    if kind is RegKind.TVP:
        return _pow(norm, p)
    if kind is RegKind.WTV:
        return alpha * norm
    if kind is RegKind.WTVP:
        return _pow(alpha * norm, p)
    return _pow(alpha * anisotropic_norm(g[0], g[1], theta, a), p)


def penalty_h(kind, alpha=1.0, p=1.0, a=1.0):
    """Parameter penalty of the hypermodel for ``kind``."""
    kind = RegKind.parse(kind)
    alpha = np.asarray(alpha, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if np.any(alpha <= 0) or np.any(p <= 0) or np.any(np.asarray(a) <= 0):
        raise ValueError("alpha, p and a must be positive")
    if kind is RegKind.TV:
        return -np.log(alpha) / alpha
    if kind is RegKind.TVP:
        return -(np.log(alpha * p) - special.gammaln(1.0 / p)) / alpha**p
    if kind is RegKind.WTV:
        return -np.log(alpha)
    if kind is RegKind.WTVP:
        return -(np.log(alpha * p) - special.gammaln(1.0 / p))
    # the tabulated penalty keeps a 2^(2/p) that the normalized density drops
    return -bgg_log_norm(alpha, p, a) + (2.0 / p) * math.log(2.0)


def regularizer_value(u: np.ndarray, maps: ParamMaps, kind, boundary="neumann") -> float:
    """Sum over pixels of ``f((Du)_i; theta_i)``."""
    u = np.asarray(u, dtype=np.float64)
    if maps.shape != u.shape:
        raise ValueError(f"maps shape {maps.shape} does not match image {u.shape}")
    g = gradient(u, boundary)
    return float(np.sum(penalty_f(g, kind, maps.alpha, maps.p, maps.theta, maps.a)))
