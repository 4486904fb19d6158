"""Exponential time stepping around the exact coupled linear block.

Per lattice mode the linear part of the (w, u) equations is
``d/dt (w, u) = -M (w, u)`` with ``M = [[1, -1], [0, lam]]``, ``lam = |xi|^2``.
Its exponential is upper triangular with entries ``a = e^{-t}``,
``e = e^{-t lam}`` and off-diagonal ``b = (e^{-t lam} - e^{-t}) / (1 - lam)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .dynamics import Tendency, rhs_nonlinear
from .spectral import FluidState, Grid, SpectralField, leray_project, symmetrize

# |1 - lam| below this switches b to its Taylor expansion around lam = 1
DEGENERATE_THRESHOLD = 1e-6

SCHEMES = ("etd-rk2",)


class NumericalAbort(RuntimeError):
    """Non-finite values appeared; ``state`` is the last finite snapshot."""

    def __init__(self, message: str, state: FluidState):
        super().__init__(message)
        self.state = state


def _check_args(lam, t):
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda = |xi|^2 must be nonnegative")
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return np.broadcast_arrays(lam, t)


def _offdiag(lam: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(e^{-t lam} - e^{-t}) / (1 - lam) without cancellation or overflow.

    Written as e^{-t min(1, lam)} (1 - e^{-t |1 - lam|}) / |1 - lam|; near
    lam = 1 the expansion t e^{-t} (1 + t delta / 2 + (t delta)^2 / 6) is used.
    """
    delta = 1.0 - lam
    near = np.abs(delta) <= DEGENERATE_THRESHOLD
    gap = np.where(near, 1.0, np.abs(delta))
    far = np.exp(-t * np.minimum(lam, 1.0)) * -np.expm1(-t * gap) / gap
    td = t * delta
    series = t * np.exp(-t) * (1.0 + td / 2.0 + td * td / 6.0)
    return np.where(near, series, far)


def propagator_entries(lam, t):
    """Entries (a, b, c, e) of exp(-t M); ``c`` is identically zero."""
    lam, t = _check_args(lam, t)
    a = np.exp(-t)
    e = np.exp(-t * lam)
    b = _offdiag(lam, t)
    return a, b, np.zeros_like(a), e


def damped_mode_propagator(lam, t):
    """Same flow in the variables (w - u, u): entries (e^{-t}, g, 0, e^{-t lam}).

    ``g = lam * b``; since ``|b| <= t e^{-t min(1, lam)}`` one has
    ``|g| <= t e^{-t lam}`` whenever ``lam < 1``.
    """
    lam, t = _check_args(lam, t)
    b = _offdiag(lam, t)
    return np.exp(-t), lam * b, np.zeros_like(lam), np.exp(-t * lam)


@dataclass(frozen=True)
class StepConfig:
    dt: float
    t_end: float
    output_stride: int = 1
    scheme: str = "etd-rk2"
    linear_only: bool = False
    courant: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if int(self.output_stride) < 1:
            raise ValueError("output_stride must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.courant > 0:
            raise ValueError("courant number must be positive")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9))


def cfl_limit(state: FluidState, courant: float = 0.5) -> float:
    """Advective step bound courant / (max|v| * max|xi|) over w and u.

    Stiff linear terms are integrated exactly and do not enter.
    """
    g = state.grid
    vmax = 0.0
    for f in (state.w, state.u):
        phys = f.physical()
        vmax = max(vmax, float(np.sqrt(np.sum(phys**2, axis=0)).max()))
    xi_max = g.n_cut / g.L
    if vmax == 0:
        return math.inf
    return courant / (vmax * xi_max)


class _Propagator:
    def __init__(self, grid: Grid, dt: float):
        a, b, _, e = propagator_entries(grid.xi2, dt)
        self.a, self.b, self.e = a, b, e

    def apply(self, w: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.a * w + self.b * u, self.e * u


_propagators: dict[tuple[Grid, float], _Propagator] = {}


def _propagator(grid: Grid, dt: float) -> _Propagator:
    key = (grid, float(dt))
    prop = _propagators.get(key)
    if prop is None:
        if len(_propagators) > 16:
            _propagators.clear()
        prop = _propagators[key] = _Propagator(grid, dt)
    return prop


def _finalize(t: float, rho, w, u, grid: Grid) -> FluidState:
    rho = SpectralField(grid, symmetrize(rho, grid))
    w = SpectralField(grid, symmetrize(w, grid))
    u = leray_project(SpectralField(grid, symmetrize(u, grid)))
    return FluidState(t, rho, w, u)


def step(state: FluidState, cfg: StepConfig,
         rhs: Callable[[FluidState], Tendency] | None = None) -> FluidState:
    """One integrating-factor Heun step.

    predictor  y* = E (y + dt N(y))
    corrector  y' = E y + dt/2 (E N(y) + N(y*))
    with E the exact linear propagator over dt (identity for rho).
    """
    g = state.grid
    dt = cfg.dt
    prop = _propagator(g, dt)
    if cfg.linear_only:
        w, u = prop.apply(state.w.coeffs, state.u.coeffs)
        return _finalize(state.t + dt, state.rho.coeffs.copy(), w, u, g)

    rhs = rhs or rhs_nonlinear
    n0 = rhs(state)
    w_p, u_p = prop.apply(state.w.coeffs + dt * n0.d_w.coeffs,
                          state.u.coeffs + dt * n0.d_u.coeffs)
    rho_p = state.rho.coeffs + dt * n0.d_rho.coeffs
    pred = _finalize(state.t + dt, rho_p, w_p, u_p, g)
    n1 = rhs(pred)

    w_lin, u_lin = prop.apply(state.w.coeffs, state.u.coeffs)
    nw, nu = prop.apply(n0.d_w.coeffs, n0.d_u.coeffs)
    w = w_lin + 0.5 * dt * (nw + n1.d_w.coeffs)
    u = u_lin + 0.5 * dt * (nu + n1.d_u.coeffs)
    rho = state.rho.coeffs + 0.5 * dt * (n0.d_rho.coeffs + n1.d_rho.coeffs)
    new = _finalize(state.t + dt, rho, w, u, g)
    for f in (new.rho, new.w, new.u):
        if not np.all(np.isfinite(f.coeffs)):
            raise NumericalAbort(f"non-finite coefficients at t={new.t:.6g}", state)
    return new


def evolve(state: FluidState, cfg: StepConfig,
           rhs: Callable[[FluidState], Tendency] | None = None) -> Iterator[FluidState]:
    """Yield the initial state, then every ``output_stride``-th step up to t_end.

    The final state is always yielded even if it falls between strides.
    """
    yield state
    n = cfg.n_steps
    t0 = state.t
    for i in range(1, n + 1):
        state = step(state, cfg, rhs)
        # pin times to the lattice t0 + i dt to avoid drift from repeated addition
        state = state.with_time(t0 + i * cfg.dt)
        if i % cfg.output_stride == 0 or i == n:
            yield state


def integrate(state: FluidState, cfg: StepConfig,
              rhs: Callable[[FluidState], Tendency] | None = None) -> FluidState:
    last = state
    for last in evolve(state, cfg, rhs):
        pass
    return last
