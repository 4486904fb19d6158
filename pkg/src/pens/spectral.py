"""Periodic-box discretization and spectral operators.

Fields live on a d-dimensional periodic box of side ``2*pi*L`` sampled with
``N`` points per direction.  Lattice frequencies are ``xi = k / L`` with
integer ``k`` in ``[-N/2, N/2)``.  Coefficients are stored on the full FFT
lattice (numpy ordering) with normalization ``f_hat = fftn(f) / N**d`` so a
constant field ``1`` has zero mode ``1`` and ``cos(x1)`` (``L = 1``) has
amplitude ``1/2`` at ``xi = +-e1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

# relative slack used when comparing frequency magnitudes against cutoffs
_FREQ_TOL = 1e-12


class GridError(ValueError):
    pass


def _fft_friendly(n: int) -> bool:
    if n % 2:
        return False
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class Grid:
    """Periodic lattice description.

    ``n_cut`` is the outer truncation radius of ``J_n`` in lattice units
    (``|k| <= n_cut``); the inner cut ``|xi| >= 1/n_cut`` is in physical
    frequency units.
    """

    d: int
    N: int
    L: float = 4.0
    n_cut: float | None = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise GridError(f"dimension must be 2 or 3, got {self.d}")
        if self.N < 8 or not _fft_friendly(self.N):
            raise GridError(f"N must be an even 2,3,5-smooth size >= 8, got {self.N}")
        if not self.L > 0:
            raise GridError(f"box scale L must be positive, got {self.L}")
        n_cut = self.N / 3 if self.n_cut is None else self.n_cut
        if not 0 < n_cut <= self.N / 3:
            raise GridError(f"n_cut must lie in (0, N/3], got {n_cut}")
        object.__setattr__(self, "n_cut", float(n_cut))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @property
    def side(self) -> float:
        return 2 * np.pi * self.L

    @property
    def volume(self) -> float:
        return self.side ** self.d

    @property
    def dx(self) -> float:
        return self.side / self.N

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavevectors, shape ``(d, N, ..., N)``."""
        k1 = np.fft.fftfreq(self.N, 1.0 / self.N)
        return np.array(np.meshgrid(*([k1] * self.d), indexing="ij"))

    @cached_property
    def xi(self) -> np.ndarray:
        return self.k / self.L

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k**2, axis=0)

    @cached_property
    def xi2(self) -> np.ndarray:
        return self.k2 / self.L**2

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    @cached_property
    def zero_mode(self) -> tuple[int, ...]:
        return (0,) * self.d

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cutoff = self.N / 3 * (1 + _FREQ_TOL)
        return np.all(np.abs(self.k) <= cutoff, axis=0)

    @cached_property
    def jn_mask(self) -> np.ndarray:
        return self.band_mask(self.n_cut)

    def band_mask(self, n_cut: float) -> np.ndarray:
        k_abs = np.sqrt(self.k2)
        low = self.xi_abs >= (1.0 / n_cut) * (1 - _FREQ_TOL)
        high = k_abs <= n_cut * (1 + _FREQ_TOL)
        return low & high

    @cached_property
    def reflect_index(self) -> tuple[np.ndarray, ...]:
        """Index arrays mapping each lattice point k to -k."""
        idx = (-np.arange(self.N)) % self.N
        return np.ix_(*([idx] * self.d))

    @cached_property
    def x(self) -> np.ndarray:
        """Physical sample coordinates, shape ``(d, N, ..., N)``."""
        x1 = np.arange(self.N) * self.dx
        return np.array(np.meshgrid(*([x1] * self.d), indexing="ij"))

    def frequencies(self) -> np.ndarray:
        """Lattice frequencies flattened in numpy FFT order, shape ``(N**d, d)``."""
        return self.xi.reshape(self.d, -1).T


def make_grid(d: int, N: int, L: float = 4.0, n_cut: float | None = None) -> Grid:
    return Grid(d, N, L, n_cut)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar or vector field.

    ``coeffs`` has shape ``(ncomp, N, ..., N)``; ``ncomp`` is 1 for scalars
    and ``d`` for vectors.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim == self.grid.d:
            c = c[None]
        if c.shape[1:] != self.grid.shape:
            raise GridError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.ncomp == self.grid.d

    def _new(self, coeffs):
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: SpectralField) -> SpectralField:
        return self._new(self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        return self._new(self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return self._new(-self.coeffs)

    def __mul__(self, scalar) -> SpectralField:
        return self._new(self.coeffs * scalar)

    __rmul__ = __mul__

    def component(self, i: int) -> SpectralField:
        return self._new(self.coeffs[i : i + 1])

    def mean(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + self.grid.zero_mode].copy()

    def l2_norm(self) -> float:
        """Continuum-normalized L2 norm, sqrt(volume * sum |f_hat|^2)."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def physical(self) -> np.ndarray:
        return transform_backward(self)

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int = 1) -> SpectralField:
        return cls(grid, np.zeros((ncomp,) + grid.shape, dtype=complex))


@dataclass(frozen=True)
class FluidState:
    t: float
    rho: SpectralField
    w: SpectralField
    u: SpectralField

    def __post_init__(self):
        g = self.rho.grid
        if self.w.grid != g or self.u.grid != g:
            raise GridError("all fields of a state must share one grid")
        if self.rho.ncomp != 1 or not self.w.is_vector or not self.u.is_vector:
            raise GridError("state needs scalar rho and d-component w, u")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def scaled(self, factor: float) -> FluidState:
        return FluidState(self.t, self.rho * factor, self.w * factor, self.u * factor)

    def with_time(self, t: float) -> FluidState:
        return FluidState(t, self.rho, self.w, self.u)

    def divergence_defect(self) -> float:
        """max_xi |xi . u_hat(xi)| / max(|u_hat|, tiny), in lattice units."""
        return divergence_defect(self.u)


def symmetrize(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Project onto coefficients of a real field: c(-k) = conj(c(k)) exactly."""
    refl = np.conj(coeffs[(slice(None),) + grid.reflect_index])
    return 0.5 * (coeffs + refl)


def transform_forward(grid: Grid, samples: np.ndarray) -> SpectralField:
    samples = np.asarray(samples)
    if samples.ndim == grid.d:
        samples = samples[None]
    if samples.shape[1:] != grid.shape:
        raise GridError(f"sample shape {samples.shape} does not match grid {grid.shape}")
    coeffs = sfft.fftn(samples, axes=grid.axes) / grid.N**grid.d
    return SpectralField(grid, symmetrize(coeffs, grid))


def transform_backward(field: SpectralField) -> np.ndarray:
    """Physical samples, shape ``(ncomp, N, ..., N)``."""
    g = field.grid
    return sfft.ifftn(field.coeffs * g.N**g.d, axes=g.axes).real


def gradient(f: SpectralField) -> SpectralField:
    if f.ncomp != 1:
        raise GridError("gradient expects a scalar field")
    return SpectralField(f.grid, 1j * f.grid.xi * f.coeffs[0])


def divergence(v: SpectralField) -> SpectralField:
    if not v.is_vector:
        raise GridError("divergence expects a d-component vector field")
    return SpectralField(v.grid, np.sum(1j * v.grid.xi * v.coeffs, axis=0))


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.xi2 * f.coeffs)


def inverse_neg_laplacian(f: SpectralField) -> SpectralField:
    """(-Delta)^{-1} with the zero mode set to 0."""
    g = f.grid
    inv = np.zeros_like(g.xi2)
    nz = g.k2 > 0
    inv[nz] = 1.0 / g.xi2[nz]
    return SpectralField(g, inv * f.coeffs)


def leray_project(v: SpectralField) -> SpectralField:
    """v_hat - xi (xi . v_hat) / |xi|^2 per mode; zero mode untouched."""
    if not v.is_vector:
        raise GridError("Leray projection expects a d-component vector field")
    g = v.grid
    k = g.k
    k2 = g.k2.copy()
    k2[g.zero_mode] = 1.0
    kdotv = np.sum(k * v.coeffs, axis=0) / k2
    return SpectralField(g, v.coeffs - k * kdotv)


def jn_truncate(f: SpectralField, n_cut: float | None = None) -> SpectralField:
    g = f.grid
    mask = g.jn_mask if n_cut is None else g.band_mask(n_cut)
    return SpectralField(g, f.coeffs * mask)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def inner(f: SpectralField, g: SpectralField) -> complex:
    """Discrete L2 pairing <f, g> = volume * sum f_hat conj(g_hat)."""
    return complex(f.grid.volume * np.sum(f.coeffs * np.conj(g.coeffs)))


def divergence_defect(v: SpectralField) -> float:
    kdotv = np.abs(np.sum(v.grid.xi * v.coeffs, axis=0))
    vmag = np.sqrt(np.sum(np.abs(v.coeffs) ** 2, axis=0))
    scale = max(float(vmag.max()), np.finfo(float).tiny)
    return float(kdotv.max() / scale)
