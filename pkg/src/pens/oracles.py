"""Slow reference implementations used to cross-check the fast paths.

Nothing here reuses the shell machinery, the propagator, the RHS or the
Leray projector of the main modules; only the transform layer is shared.
"""

from __future__ import annotations

import math

import numpy as np

from .spectral import FluidState, SpectralField, transform_backward, transform_forward

# diagonal Pade [6/6] coefficients of exp
_PADE6 = [1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280]


def dense_matrix_exp(M, t: float = 1.0) -> np.ndarray:
    """exp(t M) for a (batch of) square matrix by scaling and squaring.

    ``M`` may have shape ``(..., n, n)``.
    """
    A = np.asarray(M, dtype=float) * t
    n = A.shape[-1]
    norm = np.max(np.sum(np.abs(A), axis=-2))
    s = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0 else 0)
    A = A / 2.0**s
    eye = np.broadcast_to(np.eye(n), A.shape)
    num = np.zeros_like(A)
    den = np.zeros_like(A)
    power = eye.copy()
    for i, c in enumerate(_PADE6):
        if i:
            power = power @ A
        num = num + c * power
        den = den + (-1) ** i * c * power
    E = np.linalg.solve(den, num)
    for _ in range(s):
        E = E @ E
    return E


def _chi(x):
    x = np.asarray(x, float)
    return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def reference_phi(r):
    """Dyadic profile written out directly as psi(r/2) - psi(r) with
    psi(r) = chi(4/3 - r) / (chi(4/3 - r) + chi(r - 3/4)) after rescaling."""
    r = np.asarray(r, float)

    def psi(x):
        y = (4 / 3 - x) / (4 / 3 - 3 / 4)
        a = _chi(y)
        b = _chi(1 - y)
        return a / (a + b)

    return psi(r / 2) - psi(r)


def direct_besov(f: SpectralField, s: float, r: float = 1, band: str = "all") -> float:
    """Besov norm by an explicit per-frequency loop over candidate shells."""
    g = f.grid
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0)
    rad = np.sqrt(np.sum((g.k / g.L) ** 2, axis=0))
    nz = rad > 0
    if not nz.any():
        return 0.0
    lo = int(math.floor(math.log2(rad[nz].min()))) - 3
    hi = int(math.ceil(math.log2(rad.max()))) + 3
    terms = []
    for j in range(lo, hi + 1):
        if band == "low" and j > -1:
            continue
        if band == "high" and j < 0:
            continue
        weight = reference_phi(rad / 2.0**j)
        weight[~nz] = 0.0
        energy = g.volume * float(np.sum(weight**2 * power))
        terms.append(2.0 ** (j * s) * math.sqrt(energy))
    if not terms:
        return 0.0
    return float(sum(terms)) if r == 1 else float(max(terms))


def exact_heat(u0: SpectralField, t: float) -> SpectralField:
    """Solution of the heat equation, per mode e^{-t |xi|^2}."""
    g = u0.grid
    lam = np.sum((g.k / g.L) ** 2, axis=0)
    return SpectralField(g, u0.coeffs * np.exp(-t * lam))


def _project(c: np.ndarray, k: np.ndarray) -> np.ndarray:
    k2 = np.sum(k * k, axis=0)
    k2 = np.where(k2 == 0, 1.0, k2)
    return c - k * np.sum(k * c, axis=0) / k2


def _full_rhs(rho, w, u, g, linear_only: bool):
    xi = g.k / g.L
    lam = np.sum(xi**2, axis=0)
    dw = -w + u
    du = -lam * u
    drho = np.zeros_like(rho)
    if linear_only:
        return drho, dw, du
    band = (np.sqrt(np.sum(g.k**2, axis=0)) <= g.n_cut * (1 + 1e-12)) & \
           (np.sqrt(lam) >= (1 / g.n_cut) * (1 - 1e-12))
    cut = np.all(np.abs(g.k) <= g.N / 3 * (1 + 1e-12), axis=0) & band

    def phys(c):
        return transform_backward(SpectralField(g, c))

    def spec(x):
        return transform_forward(g, x).coeffs * cut

    rp, wp, up = phys(rho), phys(w), phys(u)
    grad_w = [phys(1j * xi[i] * w) for i in range(g.d)]
    grad_u = [phys(1j * xi[i] * u) for i in range(g.d)]
    adv_w = sum(wp[i] * grad_w[i] for i in range(g.d))
    adv_u = sum(up[i] * grad_u[i] for i in range(g.d))
    flux = spec(rp * wp)
    drho = -np.sum(1j * xi * flux, axis=0)[None]
    dw = dw - spec(adv_w)
    du = du + _project(spec(rp * (wp - up)) - spec(adv_u), g.k)
    return drho, dw, du


def explicit_rk4_tiny(state: FluidState, dt: float, steps: int,
                      linear_only: bool = False) -> FluidState:
    """Classical RK4 on the full system with every term explicit (N <= 16)."""
    g = state.grid
    if g.N > 16:
        raise ValueError("explicit oracle is limited to grids with N <= 16")
    y = [state.rho.coeffs.copy(), state.w.coeffs.copy(), state.u.coeffs.copy()]

    def f(y):
        return _full_rhs(*y, g, linear_only)

    for _ in range(steps):
        k1 = f(y)
        k2 = f([a + 0.5 * dt * b for a, b in zip(y, k1)])
        k3 = f([a + 0.5 * dt * b for a, b in zip(y, k2)])
        k4 = f([a + dt * b for a, b in zip(y, k3)])
        y = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
             for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
    return FluidState(state.t + steps * dt, SpectralField(g, y[0]),
                      SpectralField(g, y[1]), SpectralField(g, y[2]))
