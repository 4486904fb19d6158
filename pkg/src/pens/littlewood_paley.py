"""Homogeneous Littlewood-Paley blocks and Besov / Chemin-Lerner norms.

The radial profile is built the usual way from a smooth cutoff ``psi``
(equal to 1 on ``[0, 3/4]``, 0 on ``[4/3, inf)``) as
``phi(r) = psi(r/2) - psi(r)``, so ``supp phi = [3/4, 8/3]`` and the dyadic
sum telescopes to one on every resolved frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from .spectral import Grid, SpectralField, GridError

ANNULUS_INNER = 3.0 / 4.0
ANNULUS_OUTER = 8.0 / 3.0
C_BERNSTEIN = 8.0 / 3.0

Band = Literal["all", "low", "high"]


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    y = 1.0 - x
    b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


def cutoff_psi(r):
    r = np.asarray(r, dtype=float)
    inner, outer = ANNULUS_INNER, ANNULUS_OUTER / 2
    return _smooth_step((outer - r) / (outer - inner))


def phi(r):
    """Dyadic profile, nonnegative, supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=float)
    return cutoff_psi(r / 2) - cutoff_psi(r)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    r: float = 1
    band: Band = "all"

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("regularity s must be finite")
        if self.r not in (1, math.inf):
            raise ValueError("summation exponent r must be 1 or inf")
        if self.band not in ("all", "low", "high"):
            raise ValueError(f"unknown band {self.band!r}")

    @property
    def name(self) -> str:
        r = "inf" if self.r == math.inf else "1"
        return f"b_{self.s:g}_{r}_{self.band}"

    @classmethod
    def parse(cls, text: str) -> BesovSpec:
        """Parse ``"s,r,band"`` e.g. ``"0.5,1,low"`` or ``"-1.5,inf,all"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) not in (2, 3):
            raise ValueError(f"cannot parse Besov spec {text!r}")
        r = math.inf if parts[1] in ("inf", "oo", "infinity") else float(parts[1])
        band = parts[2] if len(parts) == 3 else "all"
        return cls(float(parts[0]), 1 if r == 1 else r, band)


class DyadicPartition:
    """Samples of phi(2^-j |xi|) on a grid, stored sparsely per shell."""

    def __init__(self, grid: Grid):
        self.grid = grid
        r = grid.xi_abs.ravel()
        nz = r > 0
        r_min, r_max = r[nz].min(), r.max()
        j_min = math.floor(math.log2(r_min / ANNULUS_OUTER * 2))
        j_max = math.ceil(math.log2(r_max / ANNULUS_INNER)) - 1
        # drop shells whose annulus misses every lattice frequency
        js = [j for j in range(j_min, j_max + 1)
              if np.any(phi(r[nz] / 2.0**j) > 0)]
        if len(js) < 2:
            raise GridError("grid too small to host two dyadic shells")
        self.j_range = np.array(js)
        self._idx = []
        self._w = []
        for j in js:
            vals = phi(r / 2.0**j)
            idx = np.flatnonzero(vals > 0)
            self._idx.append(idx)
            self._w.append(vals[idx])

    def __len__(self):
        return len(self.j_range)

    def shell(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        pos = int(j - self.j_range[0])
        if not 0 <= pos < len(self.j_range):
            return np.empty(0, dtype=int), np.empty(0)
        return self._idx[pos], self._w[pos]

    def samples(self, j: int) -> np.ndarray:
        """phi(2^-j |xi|) on the full lattice."""
        out = np.zeros(self.grid.N**self.grid.d)
        idx, w = self.shell(j)
        out[idx] = w
        return out.reshape(self.grid.shape)

    def unity_defect(self) -> float:
        """max |sum_j phi_j - 1| over nonzero lattice frequencies."""
        total = np.zeros(self.grid.N**self.grid.d)
        for idx, w in zip(self._idx, self._w):
            total[idx] += w
        nz = self.grid.xi_abs.ravel() > 0
        return float(np.abs(total[nz] - 1.0).max())

    def overlap_count(self) -> int:
        count = np.zeros(self.grid.N**self.grid.d, dtype=int)
        for idx in self._idx:
            count[idx] += 1
        return int(count.max())

    def shell_energies(self, f: SpectralField) -> np.ndarray:
        """||Delta_j f||_{L2}^2 for every shell (vector fields summed over components)."""
        power = np.sum(np.abs(f.coeffs) ** 2, axis=0).ravel()
        vol = self.grid.volume
        return np.array([vol * np.dot(w * w, power[idx])
                         for idx, w in zip(self._idx, self._w)])

    def shell_norms(self, f: SpectralField) -> np.ndarray:
        return np.sqrt(self.shell_energies(f))

    def block(self, f: SpectralField, j: int) -> SpectralField:
        return SpectralField(f.grid, f.coeffs * self.samples(j))

    def low_cut(self, f: SpectralField, j: int) -> SpectralField:
        """S_j f = sum_{j' <= j-1} block(f, j')."""
        mult = np.zeros(self.grid.N**self.grid.d)
        for jj, idx, w in zip(self.j_range, self._idx, self._w):
            if jj <= j - 1:
                mult[idx] += w
        return SpectralField(f.grid, f.coeffs * mult.reshape(self.grid.shape))

    @cached_property
    def _band_masks(self):
        return {"all": np.ones(len(self.j_range), bool),
                "low": self.j_range <= -1,
                "high": self.j_range >= 0}

    def combine(self, shell_norms: np.ndarray, spec: BesovSpec) -> float:
        """l^r combination of 2^{js} * shell_norms over the spec's band."""
        mask = self._band_masks[spec.band]
        if not mask.any():
            return 0.0
        weighted = 2.0 ** (spec.s * self.j_range[mask]) * shell_norms[mask]
        if spec.r == 1:
            return float(np.sum(weighted))
        return float(np.max(weighted))

    def besov_norm(self, f: SpectralField, spec: BesovSpec) -> float:
        return self.combine(self.shell_norms(f), spec)

    def outside_energy(self, f: SpectralField) -> float:
        """Energy not carried by any resolved shell (the mean excluded)."""
        g = self.grid
        covered = np.zeros(g.N**g.d)
        for idx, w in zip(self._idx, self._w):
            covered[idx] += w
        power = np.sum(np.abs(f.coeffs) ** 2, axis=0).ravel()
        nz = g.xi_abs.ravel() > 0
        return float(g.volume * np.sum(power[nz] * (1 - np.minimum(covered[nz], 1)) ** 2))


_partitions: dict[Grid, DyadicPartition] = {}


def build_partition(grid: Grid) -> DyadicPartition:
    part = _partitions.get(grid)
    if part is None:
        part = _partitions[grid] = DyadicPartition(grid)
    return part


def block(f: SpectralField, j: int) -> SpectralField:
    return build_partition(f.grid).block(f, j)


def besov_norm(f: SpectralField, spec: BesovSpec) -> float:
    return build_partition(f.grid).besov_norm(f, spec)


def chemin_lerner_norm(times: Sequence[float], fields: Sequence[SpectralField],
                       spec: BesovSpec, q: float = math.inf) -> float:
    """Time norm inside the shell sum: || 2^{js} ||Delta_j f||_{L^q_t L2} ||_{l^r}."""
    if len(fields) == 0:
        raise ValueError("empty time series")
    part = build_partition(fields[0].grid)
    norms = np.array([part.shell_norms(f) for f in fields])
    if q == math.inf:
        per_shell = norms.max(axis=0)
    elif q == 1:
        if len(fields) < 2:
            raise ValueError("q=1 needs at least two time samples")
        per_shell = np.trapezoid(norms, np.asarray(times, float), axis=0)
    else:
        raise ValueError("q must be 1 or inf")
    return part.combine(per_shell, spec)


def time_lebesgue_norm(times: Sequence[float], fields: Sequence[SpectralField],
                       spec: BesovSpec, q: float = 1) -> float:
    """Ordinary L^q_t(B) norm: time norm of the Besov norms."""
    vals = np.array([besov_norm(f, spec) for f in fields])
    if q == math.inf:
        return float(vals.max())
    return float(np.trapezoid(vals, np.asarray(times, float)))


def bernstein_ratio(f: SpectralField, j: int) -> float:
    """||grad Delta_j f|| / (2^j ||Delta_j f||); nan when the block vanishes."""
    part = build_partition(f.grid)
    idx, w = part.shell(j)
    power = np.sum(np.abs(f.coeffs) ** 2, axis=0).ravel()[idx] * w * w
    base = power.sum()
    if base == 0:
        return math.nan
    grad = np.dot(f.grid.xi2.ravel()[idx], power)
    return float(math.sqrt(grad / base) / 2.0**j)
