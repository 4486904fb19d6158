"""Nonlinear right-hand side of the truncated system and derived quantities.

The stiff linear block (damping of ``w`` toward ``u`` and viscosity on
``u``) is left to the integrator; everything here is the explicit part.
Products are formed on the physical grid from band-limited fields, then
dealiased and truncated by ``J_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (FluidState, SpectralField, dealias, divergence,
                       divergence_defect, gradient, inverse_neg_laplacian, jn_truncate,
                       leray_project, transform_backward, transform_forward)

# relative tolerance for the div u = 0 precondition of rhs_nonlinear
DIV_TOLERANCE = 1e-10


class DivergenceError(ValueError):
    """Raised when a velocity handed to the RHS is not divergence-free."""


@dataclass(frozen=True)
class Tendency:
    """Explicit time derivatives; linear parts live in the integrator."""

    d_rho: SpectralField
    d_w: SpectralField
    d_u: SpectralField


def _to_grid(f: SpectralField, samples: np.ndarray) -> SpectralField:
    return dealias(transform_forward(f.grid, samples))


def _advection(v_phys: np.ndarray, f: SpectralField) -> np.ndarray:
    """Physical samples of (v . grad) f for a vector field f."""
    g = f.grid
    out = np.zeros((f.ncomp,) + g.shape)
    for i in range(g.d):
        di = SpectralField(g, 1j * g.xi[i] * f.coeffs)
        out += v_phys[i] * transform_backward(di)
    return out


def _check_div(u: SpectralField) -> None:
    defect = divergence_defect(u)
    if defect > DIV_TOLERANCE:
        raise DivergenceError(f"velocity u is not divergence-free (defect {defect:.3e})")


def rhs_nonlinear(state: FluidState, check_div: bool = True) -> Tendency:
    """d_rho = -div J_n(rho w), d_w = -J_n (w.grad)w,
    d_u = -J_n P (u.grad)u + J_n P (rho (w - u))."""
    if check_div:
        _check_div(state.u)
    rho = transform_backward(state.rho)
    w = transform_backward(state.w)
    u = transform_backward(state.u)

    flux = jn_truncate(_to_grid(state.w, rho * w))
    d_rho = -divergence(flux)

    d_w = -jn_truncate(_to_grid(state.w, _advection(w, state.w)))

    adv_u = _to_grid(state.u, _advection(u, state.u))
    drag = _to_grid(state.u, rho * (w - u))
    d_u = jn_truncate(leray_project(drag - adv_u))
    return Tendency(d_rho, d_w, d_u)


def _grad_inv_lap_div(v: SpectralField) -> SpectralField:
    return gradient(inverse_neg_laplacian(divergence(v)))


def pressure_gradient(state: FluidState) -> SpectralField:
    """grad P = grad(-Lap)^-1 div((u.grad)u) - grad(-Lap)^-1 div(rho (w - u))."""
    rho = transform_backward(state.rho)
    w = transform_backward(state.w)
    u = transform_backward(state.u)
    adv_u = _to_grid(state.u, _advection(u, state.u))
    drag = _to_grid(state.u, rho * (w - u))
    return _grad_inv_lap_div(adv_u) - _grad_inv_lap_div(drag)


def conserved_mass(state: FluidState) -> float:
    """Integral of rho over the box: zero mode times volume."""
    return float(state.rho.coeffs[(0,) + state.grid.zero_mode].real * state.grid.volume)


def min_density(state: FluidState) -> float:
    return float(transform_backward(state.rho).min())
