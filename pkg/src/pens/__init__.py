"""Pseudo-spectral simulation and Besov-space diagnostics for the
pressureless Euler / Navier-Stokes coupling on a periodic box."""

__version__ = "0.1.0"

from .spectral import FluidState, Grid, GridError, SpectralField, make_grid  # noqa: E402
from .littlewood_paley import BesovSpec, besov_norm, build_partition  # noqa: E402

__all__ = ["FluidState", "Grid", "GridError", "SpectralField", "make_grid",
           "BesovSpec", "besov_norm", "build_partition", "__version__"]
