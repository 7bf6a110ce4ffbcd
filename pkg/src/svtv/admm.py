"""Constrained restoration by ADMM with periodically re-estimated parameter maps.

The problem is

    min_u  sum_i f((Du)_i; theta_i)   subject to   ||Au - b||_q <= delta_q,

split as ``g = Du`` and ``r = Au``. One iteration solves a linear system in
``u``, applies the per-pixel prox to get ``g``, projects onto the fidelity
ball to get ``r`` and takes a dual ascent step. The maps ``theta`` are
re-estimated from the current ``u`` every ``param_refresh`` iterations and
frozen in between.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .distributions import NoiseModel
from .errors import ConfigError, NumericalError
from .estimation import EstimationConfig, estimate_maps
from .imagecore import as_image, gradient, gradient_adjoint, gradient_symbol, kernel_otf
from .projection import BallSpec, ball_norm, project_ball
from .prox import prox
from .regularizers import ParamMaps, RegKind, penalty_f

log = logging.getLogger(__name__)

_WEIGHTED = {RegKind.TV: RegKind.WTV, RegKind.TVP: RegKind.WTVP}


# Flat windows get alpha = 1/eps_reg; inside the loop a tiny eps_reg makes the
# re-estimated weights swing by orders of magnitude between iterations.
RESTORE_EPS_REG = 1e-2


def _restore_estimation() -> EstimationConfig:
    return EstimationConfig(eps_reg=RESTORE_EPS_REG)


@dataclass
class AdmmConfig:
    noise: NoiseModel
    beta_g: float = 300.0
    beta_r: float = 1000.0
    max_iters: int = 500
    tol: float = 1e-5
    # None picks 1 for WTV and 30 otherwise; 0 or inf estimates once
    param_refresh: int | float | None = None
    init: str | np.ndarray = "observed"
    estimation: EstimationConfig = field(default_factory=_restore_estimation)
    gradient_boundary: str = "neumann"
    solver: str = "auto"
    cg_tol: float = 1e-12
    cg_maxiter: int = 500
    prox_grid: int = 513
    divergence_window: int = 20
    divergence_factor: float = 10.0
    check_duals: bool = False

    def __post_init__(self):
        if not (self.beta_g > 0 and self.beta_r > 0):
            raise ConfigError("beta_g and beta_r must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError("max_iters must be a positive integer")
        if self.param_refresh is not None and not self.param_refresh >= 0:
            raise ConfigError("param_refresh must be nonnegative")
        if self.solver not in ("auto", "spectral", "cg"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.gradient_boundary not in ("neumann", "periodic"):
            raise ConfigError(f"unknown gradient boundary {self.gradient_boundary!r}")
        if isinstance(self.init, str) and self.init not in ("observed", "flat"):
            raise ConfigError(f"init must be 'observed', 'flat' or an image, got {self.init!r}")

    def refresh_every(self, kind: RegKind) -> float:
        if self.param_refresh is None:
            return 1 if kind is RegKind.WTV else 30
        if self.param_refresh == 0:
            return math.inf
        return self.param_refresh


@dataclass
class AdmmState:
    u: np.ndarray
    g: np.ndarray
    r: np.ndarray
    rho_g: np.ndarray
    rho_r: np.ndarray
    iter: int = 0
    eta: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    fidelity: list[float] = field(default_factory=list)
    residual_g: list[float] = field(default_factory=list)
    residual_r: list[float] = field(default_factory=list)
    refreshes: list[int] = field(default_factory=list)
    map_snapshots: list[ParamMaps] = field(default_factory=list)


@dataclass
class RestorationResult:
    u_star: np.ndarray
    maps: ParamMaps
    iterations: int
    eta: float
    fidelity: float
    delta: float
    converged: bool
    heuristic: bool
    state: AdmmState

    def diagnostics_rows(self):
        s = self.state
        for j in range(len(s.eta)):
            yield (j + 1, s.eta[j], s.objective[j], s.fidelity[j], s.residual_g[j], s.residual_r[j])

    def write_diagnostics(self, path, header_lines=()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["iter", "eta", "objective", "fidelity", "residual_g", "residual_r"])
            for row in self.diagnostics_rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


class USolver:
    """Solves ``(beta_g D^T D + beta_r A^T A) u = rhs``.

    Exact in the Fourier domain when both operators are periodic; otherwise
    preconditioned CG with the periodic approximation as preconditioner.
    """

    def __init__(self, A, shape, beta_g, beta_r, boundary="neumann", solver="auto",
                 cg_tol=1e-12, cg_maxiter=500, preconditioned=True):
        self.A = A
        self.preconditioned = preconditioned
        self.shape = tuple(shape)
        self.beta_g, self.beta_r = float(beta_g), float(beta_r)
        self.boundary = boundary
        self.cg_tol, self.cg_maxiter = cg_tol, cg_maxiter
        periodic = boundary == "periodic" and getattr(A, "periodic", False)
        if solver == "spectral" and not periodic:
            raise ConfigError("spectral solve needs periodic gradient and blur")
        self.spectral = periodic if solver == "auto" else solver == "spectral"

        otf = A.otf if getattr(A, "otf", None) is not None else kernel_otf(A.kernel, self.shape)
        self.denom = self.beta_g * gradient_symbol(self.shape) + self.beta_r * np.abs(otf) ** 2
        if self.denom.min() <= 1e-14 * self.denom.max():
            raise NumericalError("u-system is singular: the blur removes a frequency the gradient cannot see")
        self.cg_iterations = 0

    def matvec(self, u):
        u = np.asarray(u, dtype=np.float64).reshape(self.shape)
        out = self.beta_g * gradient_adjoint(gradient(u, self.boundary), self.boundary)
        out += self.beta_r * self.A.adjoint(self.A.apply(u))
        return out

    def _precondition(self, v):
        v = np.asarray(v, dtype=np.float64).reshape(self.shape)
        return np.real(np.fft.ifft2(np.fft.fft2(v) / self.denom))

    def solve(self, rhs, x0=None):
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.spectral:
            return self._precondition(rhs)
        n = rhs.size
        op = LinearOperator((n, n), matvec=lambda v: self.matvec(v).ravel(), dtype=np.float64)
        pre = None
        if self.preconditioned:
            pre = LinearOperator((n, n), matvec=lambda v: self._precondition(v).ravel(), dtype=np.float64)
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = cg(op, rhs.ravel(), x0=None if x0 is None else np.ravel(x0),
                     rtol=self.cg_tol, atol=0.0, maxiter=self.cg_maxiter, M=pre, callback=tick)
        self.cg_iterations += count[0]
        if info != 0:
            raise NumericalError(f"CG did not reach rtol {self.cg_tol} in {self.cg_maxiter} iterations")
        return x.reshape(self.shape)


def u_rhs(state: AdmmState, A, beta_g, beta_r, boundary="neumann"):
    return (gradient_adjoint(beta_g * state.g - state.rho_g, boundary)
            + A.adjoint(beta_r * state.r - state.rho_r))


def solve_u(state: AdmmState, A, cfg: AdmmConfig, solver: USolver | None = None):
    """Minimizer over ``u`` of the augmented Lagrangian at fixed ``g, r`` and duals."""
    if solver is None:
        solver = USolver(A, state.u.shape, cfg.beta_g, cfg.beta_r, cfg.gradient_boundary,
                         cfg.solver, cfg.cg_tol, cfg.cg_maxiter)
    rhs = u_rhs(state, A, cfg.beta_g, cfg.beta_r, cfg.gradient_boundary)
    return solver.solve(rhs, x0=state.u)


def _initial_image(b, init):
    if isinstance(init, str):
        return b.copy() if init == "observed" else np.full_like(b, b.mean())
    u0 = as_image(init, "init")
    if u0.shape != b.shape:
        raise ConfigError(f"init image shape {u0.shape} does not match {b.shape}")
    return u0.copy()


def admm_restore(b, A, kind, cfg: AdmmConfig, maps: ParamMaps | None = None) -> RestorationResult:
    """Restore ``b`` observed through ``A``.

    ``maps`` fixes the parameter maps used before the first refresh; without
    it they are estimated from the initial image. Raises
    :class:`NumericalError` on non-finite iterates or when the relative change
    grows by ``divergence_factor`` over ``divergence_window`` iterations.
    """
    kind = RegKind.parse(kind)
    b = as_image(b, "b")
    if not np.all(np.isfinite(b)):
        raise ConfigError("observation contains non-finite values")
    if tuple(A.shape) != b.shape:
        raise ConfigError(f"operator shape {A.shape} does not match image {b.shape}")
    bd = cfg.gradient_boundary
    delta = cfg.noise.radius(b.size)
    ball = BallSpec(cfg.noise.q, delta, b)
    solver = USolver(A, b.shape, cfg.beta_g, cfg.beta_r, bd, cfg.solver, cfg.cg_tol, cfg.cg_maxiter)
    refresh = cfg.refresh_every(kind)
    weighted = _WEIGHTED.get(kind, kind)

    u = _initial_image(b, cfg.init)
    Du, Au = gradient(u, bd), A.apply(u)
    state = AdmmState(u=u, g=Du.copy(), r=Au.copy(), rho_g=np.zeros_like(Du), rho_r=np.zeros_like(Au))
    if maps is not None:
        if maps.shape != b.shape:
            raise ConfigError(f"maps shape {maps.shape} does not match image {b.shape}")
        maps = maps.copy()
        maps.validate()
    last_refresh = 0
    converged = False

    for j in range(cfg.max_iters):
        if maps is None or (j > 0 and j % refresh == 0):
            maps = estimate_maps(kind, state.u, cfg.estimation, bd)
            last_refresh = j
            state.refreshes.append(j)
            state.map_snapshots.append(maps.copy())

        u_new = solve_u(state, A, cfg, solver)
        if not np.all(np.isfinite(u_new)):
            raise NumericalError(f"non-finite iterate at iteration {j + 1}")
        Du, Au = gradient(u_new, bd), A.apply(u_new)

        w = Du + state.rho_g / cfg.beta_g
        state.g = prox(kind, w, cfg.beta_g, maps.alpha, maps.p, maps.theta, maps.a, grid_n=cfg.prox_grid)
        y = Au + state.rho_r / cfg.beta_r
        state.r = project_ball(y, ball)

        step_g = -cfg.beta_g * (state.g - Du)
        step_r = -cfg.beta_r * (state.r - Au)
        rho_prev = state.rho_g
        state.rho_g = state.rho_g + step_g
        state.rho_r = state.rho_r + step_r
        if cfg.check_duals:
            scale = max(1.0, float(np.abs(rho_prev).max()))
            if not np.allclose(state.rho_g - rho_prev, step_g, rtol=0.0, atol=4e-16 * scale):
                raise NumericalError(f"dual update mismatch at iteration {j + 1}")

        norm_u = float(np.linalg.norm(state.u))
        eta = float(np.linalg.norm(u_new - state.u)) / (norm_u if norm_u > 0 else 1.0)
        state.u = u_new
        state.iter = j + 1
        state.eta.append(eta)
        state.objective.append(float(np.sum(penalty_f(Du, weighted, maps.alpha, maps.p, maps.theta, maps.a))))
        state.fidelity.append(ball_norm(Au - b, cfg.noise.q))
        norm_du = float(np.linalg.norm(Du))
        norm_au = float(np.linalg.norm(Au))
        state.residual_g.append(float(np.linalg.norm(state.g - Du)) / (norm_du if norm_du > 0 else 1.0))
        state.residual_r.append(float(np.linalg.norm(state.r - Au)) / (norm_au if norm_au > 0 else 1.0))

        # the first u-step reproduces u0 exactly, and a refresh changes the
        # problem, so neither can certify convergence (unless maps track u
        # every iteration, in which case the nested scheme is the fixed point)
        fresh = j == last_refresh and refresh != 1
        if j > 0 and not fresh and eta < cfg.tol:
            converged = True
            break
        k = cfg.divergence_window
        if (refresh == 1 or j - k > last_refresh) and j - k >= 1 and eta > cfg.tol and eta > cfg.divergence_factor * state.eta[j - k]:
            raise NumericalError(
                f"divergence: eta grew from {state.eta[j - k]:.3e} to {eta:.3e} "
                f"between iterations {j + 1 - k} and {j + 1}")

    heuristic = bool(np.any(maps.p < 1.0)) if kind in (RegKind.TVP, RegKind.WTVP, RegKind.WDTVP) else False
    if heuristic:
        log.info("non-convex run (some p < 1): no convergence guarantee")
    return RestorationResult(
        u_star=state.u, maps=maps, iterations=state.iter, eta=state.eta[-1],
        fidelity=state.fidelity[-1], delta=delta, converged=converged,
        heuristic=heuristic, state=state)
