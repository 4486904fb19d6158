"""Series CSV, summary JSON and the raw-coefficient binary format.

Binary layout (little endian): header ``int32 d, int32 N, float64 L,
int32 ncomp`` followed by ``ncomp * N**d`` complex64 values, component-major,
each component in lexicographic frequency order (``k`` running from
``-N/2`` to ``N/2 - 1`` along every axis, last axis fastest).
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .spectral import FluidState, Grid, GridError, SpectralField, make_grid

HEADER = struct.Struct("<iidi")


def format_float(x: float) -> str:
    return "%.17g" % x


def write_series(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([format_float(x) for x in row])


def read_series(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(x) for x in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary(path: str | Path, summary: dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_coefficients(path: str | Path, grid: Grid, coeffs: np.ndarray) -> None:
    coeffs = np.asarray(coeffs)
    if coeffs.shape[1:] != grid.shape:
        raise GridError("coefficient array does not match the grid")
    shifted = np.fft.fftshift(coeffs, axes=tuple(range(1, grid.d + 1)))
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(grid.d, grid.N, float(grid.L), coeffs.shape[0]))
        fh.write(shifted.astype("<c8").tobytes(order="C"))


def import_coefficients(path: str | Path, n_cut: float | None = None) -> tuple[Grid, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("file too short for a coefficient header")
    d, N, L, ncomp = HEADER.unpack_from(raw)
    grid = make_grid(d, N, L, n_cut)
    count = ncomp * N**d
    body = raw[HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"expected {count} complex64 values, found {len(body) // 8}")
    data = np.frombuffer(body, dtype="<c8").reshape((ncomp,) + grid.shape)
    coeffs = np.fft.ifftshift(data.astype(complex), axes=tuple(range(1, d + 1)))
    return grid, coeffs


def export_state(path: str | Path, state: FluidState) -> None:
    stacked = np.concatenate([state.rho.coeffs, state.w.coeffs, state.u.coeffs])
    export_coefficients(path, state.grid, stacked)


def import_state(path: str | Path, n_cut: float | None = None, t: float = 0.0) -> FluidState:
    grid, c = import_coefficients(path, n_cut)
    d = grid.d
    if c.shape[0] != 1 + 2 * d:
        raise ValueError(f"a state needs {1 + 2 * d} components, file has {c.shape[0]}")
    return FluidState(t, SpectralField(grid, c[:1]), SpectralField(grid, c[1:1 + d]),
                      SpectralField(grid, c[1 + d:]))
