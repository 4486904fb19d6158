"""Seeded generators of small initial states.

Every generated field is band-limited inside the ``J_n`` band; the velocity
``u`` is Leray-projected.  The state is then rescaled by one common factor so
that a chosen functional (by default the smallness functional ``Z0``) hits the
target amplitude exactly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import negative_regularity, z0
from .spectral import (FluidState, Grid, SpectralField, leray_project,
                       make_grid, transform_forward)

RHO_STYLES = ("signed-random", "nonneg-bump", "zero")
VELOCITY_STYLES = ("random-bandlimited", "taylor-green", "single-mode", "localized", "zero")
MODULUS_MODES = ("fixed", "gaussian")
NORMALIZATIONS = ("z0", "negreg")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str = "custom"
    d: int = 2
    N: int = 64
    L: float = 4.0
    n_cut: float | None = None
    alpha: float = 0.05
    seed: int = 0
    rho_style: str = "signed-random"
    velocity_style: str = "random-bandlimited"
    k_extra: int = 0
    # shape of the random spectra: |f_hat| ~ (1 + (|xi|/r0)^2)^(-(d/2+2)/2)
    r0: float = 1.0
    modulus: str = "fixed"
    # physical width of the localized velocity bump
    width: float = 2.0
    normalize: str = "z0"

    def __post_init__(self):
        if self.rho_style not in RHO_STYLES:
            raise ScenarioError(f"unknown rho_style {self.rho_style!r}")
        if self.velocity_style not in VELOCITY_STYLES:
            raise ScenarioError(f"unknown velocity_style {self.velocity_style!r}")
        if self.modulus not in MODULUS_MODES:
            raise ScenarioError(f"unknown modulus mode {self.modulus!r}")
        if self.normalize not in NORMALIZATIONS:
            raise ScenarioError(f"unknown normalization {self.normalize!r}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ScenarioError("amplitude budget alpha must be finite and >= 0")
        if self.k_extra < 0:
            raise ScenarioError("k_extra must be >= 0")
        if not (self.r0 > 0 and self.width > 0):
            raise ScenarioError("r0 and width must be positive")
        self.grid  # validates grid parameters

    @property
    def grid(self) -> Grid:
        return make_grid(self.d, self.N, self.L, self.n_cut)

    def as_dict(self) -> dict:
        return asdict(self)


def envelope(r: np.ndarray, d: int, r0: float) -> np.ndarray:
    return (1.0 + (r / r0) ** 2) ** (-(d / 2 + 2) / 2)


def _band(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return coeffs * grid.jn_mask


def _random_coeffs(grid: Grid, rng: np.random.Generator, ncomp: int,
                   r0: float, modulus: str, project: bool) -> np.ndarray:
    """Random real field with prescribed radial spectrum, inside the J_n band."""
    noise = rng.standard_normal((ncomp,) + grid.shape)
    c = transform_forward(grid, noise).coeffs
    if project:
        c = leray_project(SpectralField(grid, c)).coeffs
    env = envelope(grid.xi_abs, grid.d, r0)
    if modulus == "fixed":
        # keep only the phase / polarization; the modulus equals the envelope
        mag = np.sqrt(np.sum(np.abs(c) ** 2, axis=0))
        c = np.where(mag > 0, c / np.where(mag > 0, mag, 1.0), 0.0) * env
    else:
        c = c * env * grid.N ** (grid.d / 2)
    return _band(grid, c)


def _gaussian_bump(grid: Grid, width: float) -> np.ndarray:
    centre = grid.side / 2
    r2 = np.sum((grid.x - centre) ** 2, axis=0)
    return np.exp(-r2 / (2 * width**2))


def _rho(sc: Scenario, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    if sc.rho_style == "zero":
        return np.zeros((1,) + grid.shape, complex)
    if sc.rho_style == "signed-random":
        return _random_coeffs(grid, rng, 1, sc.r0, sc.modulus, project=False)
    # nonneg-bump: band-limited bump plus the mean needed to keep it >= 0
    bump = transform_forward(grid, _gaussian_bump(grid, sc.width))
    c = _band(grid, bump.coeffs)
    lowest = SpectralField(grid, c).physical().min()
    # small relative margin so rounding in the later rescale cannot dip below 0
    c[(0,) + grid.zero_mode] = max(-lowest, 0.0) * (1 + 1e-9)
    return c


def _velocity(sc: Scenario, grid: Grid, rng_w, rng_u) -> tuple[np.ndarray, np.ndarray]:
    d = grid.d
    shape = (d,) + grid.shape
    style = sc.velocity_style
    if style == "zero":
        return np.zeros(shape, complex), np.zeros(shape, complex)
    if style == "random-bandlimited":
        w = _random_coeffs(grid, rng_w, d, sc.r0, sc.modulus, project=False)
        u = _random_coeffs(grid, rng_u, d, sc.r0, sc.modulus, project=True)
        return w, u
    x = grid.x / grid.L
    if style == "taylor-green":
        phys = np.zeros(shape)
        if d == 2:
            phys[0] = np.sin(x[0]) * np.cos(x[1])
            phys[1] = -np.cos(x[0]) * np.sin(x[1])
        else:
            phys[0] = np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2])
            phys[1] = -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2])
        u = _band(grid, transform_forward(grid, phys).coeffs)
        return u.copy(), u
    if style == "single-mode":
        phys = np.zeros(shape)
        phys[1] = np.cos(x[0])
        u = _band(grid, transform_forward(grid, phys).coeffs)
        return u.copy(), u
    # localized: Gaussian bump along e1; u is its divergence-free part
    phys = np.zeros(shape)
    phys[0] = _gaussian_bump(grid, sc.width)
    w = _band(grid, transform_forward(grid, phys).coeffs)
    u = leray_project(SpectralField(grid, w)).coeffs
    return w, u


def raw_state(sc: Scenario) -> FluidState:
    """Unscaled state with the requested shapes."""
    grid = sc.grid
    seeds = np.random.SeedSequence(sc.seed).spawn(3)
    rng_rho, rng_w, rng_u = (np.random.default_rng(s) for s in seeds)
    rho = _rho(sc, grid, rng_rho)
    w, u = _velocity(sc, grid, rng_w, rng_u)
    return FluidState(0.0, SpectralField(grid, rho), SpectralField(grid, w),
                      leray_project(SpectralField(grid, u)))


def generate(sc: Scenario) -> FluidState:
    """Seeded initial state rescaled so the chosen functional equals alpha."""
    state = raw_state(sc)
    measure = z0 if sc.normalize == "z0" else negative_regularity
    value = measure(state)
    if value == 0:
        if sc.alpha > 0:
            raise ScenarioError(f"scenario {sc.name!r} has zero fields; "
                                f"cannot reach a positive budget {sc.alpha}")
        return state
    return state.scaled(sc.alpha / value)
