"""Scenario execution: generate, step, sample diagnostics, fit, persist."""

from __future__ import annotations

import math
import subprocess
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .diagnostics import (Sampler, box_floor_time, fit_decay, monotonicity_check,
                          nash_monitor, stability_functional, usable_window, z0)
from .dynamics import conserved_mass
from .initial_data import Scenario, generate
from .integrator import NumericalAbort, cfl_limit, step
from .io import write_series, write_summary
from .spectral import FluidState

BASE_COLUMNS = ["t", "l2_w", "l2_u", "l2_diff", "L", "H", "Z", "min_rho"]


class RunAborted(RuntimeError):
    """Integrator abort; partial series and summary were written first."""

    def __init__(self, message: str, summary: dict):
        super().__init__(message)
        self.summary = summary


@dataclass
class RunResult:
    config: RunConfig
    columns: list[str]
    rows: np.ndarray
    summary: dict
    series_path: Path | None = None
    summary_path: Path | None = None

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


@dataclass
class StabilityResult:
    t: np.ndarray
    z_delta: np.ndarray
    ratio: np.ndarray
    size: float


def source_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        rev = out.stdout.strip() if out.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"pens {__version__}" + (f" ({rev})" if rev else "")


def columns_for(cfg: RunConfig) -> list[str]:
    dg = cfg.diagnostics
    cols = BASE_COLUMNS + [t.name for t in dg.besov] + ["l2_wu", "besov_wu", "negreg", "mass"]
    if dg.linf:
        cols += ["linf_w", "linf_u", "linf_wu"]
    if dg.k >= 1:
        cols += ["L_k", "H_k"]
    return cols


def _row(sample, mass: float, cfg: RunConfig) -> list[float]:
    dg = cfg.diagnostics
    row = [sample.t, sample.l2_w, sample.l2_u, sample.l2_diff, sample.L, sample.H,
           sample.Z, sample.min_rho]
    row += [sample.norms[t.name] for t in dg.besov]
    row += [sample.l2_wu, sample.extra["besov_wu"], sample.extra["negreg"], mass]
    if dg.linf:
        row += [sample.extra[k] for k in ("linf_w", "linf_u", "linf_wu")]
    if dg.k >= 1:
        row += [sample.L_k, sample.H_k]
    return row


def check_step_size(state: FluidState, cfg: RunConfig) -> float:
    bound = cfl_limit(state, cfg.step.courant)
    if cfg.step.dt > bound:
        raise ConfigError(f"dt = {cfg.step.dt} exceeds the advective CFL bound {bound:.4g}")
    return bound


def _fits(cfg: RunConfig, columns: list[str], rows: np.ndarray) -> dict:
    grid = cfg.scenario.grid
    t = rows[:, 0]
    out = {}
    for req in cfg.diagnostics.fits:
        key = f"{req.column}@{req.window[0]:g}-{req.window[1]:g}"
        if req.c0_mode != "fit":
            key += f"/{req.c0_mode}"
        entry: dict = {"column": req.column, "requested_window": list(req.window)}
        if req.column not in columns:
            entry["error"] = f"unknown column {req.column!r}"
            out[key] = entry
            continue
        values = rows[:, columns.index(req.column)]
        inside = (t >= req.window[0]) & (t <= req.window[1])
        if not np.all(np.isfinite(values[inside]) & (values[inside] > 0)):
            # a vanishing series has no decay rate; refuse before clipping hides why
            entry["error"] = "values must be finite and positive on the fit window"
            out[key] = entry
            continue
        window, reason = usable_window(t, values, grid, req.window, cfg.diagnostics.floor_tol)
        window = (window[0], min(window[1], float(t[-1])))
        entry["clipped_by"] = reason
        try:
            fit = fit_decay(t, values, window, req.c0_mode, req.c0)
            entry.update(fit.as_dict())
        except ValueError as exc:
            entry["window"] = list(window)
            entry["error"] = str(exc)
        out[key] = entry
    return out


def _observed(cfg: RunConfig, columns: list[str], rows: np.ndarray, state0: FluidState) -> dict:
    col = {name: rows[:, i] for i, name in enumerate(columns)}
    t = col["t"]
    z_init = z0(state0)
    L0 = float(col["L"][0])
    mono = monotonicity_check(t, col["L"], col["H"])
    neg0 = float(col["negreg"][0])
    mass = col["mass"]
    obs = {
        "Z0": z_init,
        "C_obs_Z": float(col["Z"].max() / z_init) if z_init > 0 else None,
        "negreg_ratio": float(col["negreg"].max() / neg0) if neg0 > 0 else None,
        "monotonicity": {**mono.as_dict(),
                         "relative_rate": mono.max_rate / L0 if L0 > 0 else 0.0,
                         "relative_excess": mono.max_excess / L0 if L0 > 0 else 0.0},
        "mass_drift": float(np.max(np.abs(mass - mass[0]))),
        "min_rho": float(col["min_rho"].min()),
    }
    floor = box_floor_time(cfg.scenario.grid, cfg.diagnostics.floor_tol)
    obs["usable_until_box_floor"] = floor if math.isfinite(floor) else None
    try:
        obs["nash"] = nash_monitor(col["L"][1:], col["H"][1:], cfg.scenario.d).as_dict()
    except ValueError as exc:
        obs["nash"] = {"error": str(exc)}
    return obs


def run(cfg: RunConfig, write: bool = True) -> RunResult:
    """Execute one configured run; returns the series and the summary."""
    started = time.perf_counter()
    state0 = generate(cfg.scenario)
    bound = check_step_size(state0, cfg)
    columns = columns_for(cfg)
    dg = cfg.diagnostics
    sampler = Sampler(dg.besov, dg.k, dg.pressure, dg.linf)
    rows: list[list[float]] = []

    series_path = summary_path = None
    if write:
        out_dir = Path(cfg.output.dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        series_path = out_dir / f"{cfg.name}.csv"
        summary_path = out_dir / f"{cfg.name}.json"

    summary = {"config": cfg.as_dict(), "revision": source_revision(),
               "cfl_bound": bound, "status": "ok"}
    abort = None
    state = state0
    rows.append(_row(sampler(state), conserved_mass(state), cfg))
    n = cfg.step.n_steps
    try:
        for i in range(1, n + 1):
            state = step(state, cfg.step).with_time(i * cfg.step.dt)
            if i % cfg.step.output_stride == 0 or i == n:
                rows.append(_row(sampler(state), conserved_mass(state), cfg))
    except NumericalAbort as exc:
        abort = str(exc)
        summary["status"] = "aborted"
        summary["abort"] = {"message": abort, "t": exc.state.t}

    arr = np.array(rows, dtype=float)
    summary["fits"] = _fits(cfg, columns, arr) if abort is None else {}
    summary["observed"] = _observed(cfg, columns, arr, state0)
    if dg.stability_pair and abort is None:
        stab = stability_pair(cfg, dg.perturbation_size)
        half = stability_pair(cfg, dg.perturbation_size / 2)
        summary["stability"] = stability_summary(stab, half)
        if write:
            write_series(Path(cfg.output.dir) / f"{cfg.name}_stability.csv",
                         ["t", "z_delta", "ratio", "z_delta_half"],
                         np.column_stack([stab.t, stab.z_delta, stab.ratio, half.z_delta]))
    summary["wall_clock_s"] = time.perf_counter() - started
    if write:
        write_series(series_path, columns, arr)
        write_summary(summary_path, summary)
    result = RunResult(cfg, columns, arr, summary, series_path, summary_path)
    if abort is not None:
        raise RunAborted(abort, summary)
    return result


def perturbation(sc: Scenario, size: float) -> FluidState:
    """Seeded random perturbation whose difference functional equals ``size``."""
    if size < 0:
        raise ValueError("perturbation size must be >= 0")
    shape = replace(sc, name=f"{sc.name}-perturbation", seed=sc.seed + 1,
                    velocity_style="random-bandlimited", rho_style="signed-random",
                    normalize="z0", alpha=1.0)
    delta = generate(shape)
    return delta.scaled(size / stability_functional(delta))


def stability_pair(cfg: RunConfig, size: float) -> StabilityResult:
    """Evolve the scenario and a perturbed copy side by side.

    Emits the difference functional and its ratio to the initial value; with
    ``size == 0`` the two runs coincide, the series is zero and the ratio is
    taken to be 1.
    """
    if size < 0:
        raise ValueError("perturbation size must be >= 0")
    base = generate(cfg.scenario)
    delta = perturbation(cfg.scenario, size)
    other = FluidState(0.0, base.rho + delta.rho, base.w + delta.w, base.u + delta.u)

    def diff(a: FluidState, b: FluidState) -> FluidState:
        return FluidState(a.t, b.rho - a.rho, b.w - a.w, b.u - a.u)

    ts, zs = [0.0], [stability_functional(diff(base, other))]
    n = cfg.step.n_steps
    for i in range(1, n + 1):
        base = step(base, cfg.step)
        other = step(other, cfg.step)
        if i % cfg.step.output_stride == 0 or i == n:
            ts.append(i * cfg.step.dt)
            zs.append(stability_functional(diff(base, other)))
    z = np.array(zs)
    ratio = np.ones_like(z) if z[0] == 0 else z / z[0]
    return StabilityResult(np.array(ts), z, ratio, size)


def stability_summary(full: StabilityResult, half: StabilityResult) -> dict:
    pos = full.z_delta > 0
    if pos.any():
        dev = np.abs(half.z_delta[pos] / (full.z_delta[pos] / 2) - 1)
        halving = float(dev.max())
    else:
        halving = 0.0
    return {"size": full.size, "sup_ratio": float(full.ratio.max()),
            "final_ratio": float(full.ratio[-1]), "halving_max_deviation": halving}

