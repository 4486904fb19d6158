"""Run configuration: TOML documents with sections [grid], [scenario],
[step], [diagnostics] and [output].  Unknown keys are rejected."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

import tomli

from .diagnostics import TrackedNorm
from .initial_data import Scenario, ScenarioError
from .integrator import StepConfig
from .spectral import GridError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FitRequest:
    column: str
    window: tuple[float, float]
    c0_mode: str = "fit"
    c0: float | None = None

    def __post_init__(self):
        if self.c0_mode not in ("fit", "unit", "given"):
            raise ConfigError(f"unknown c0_mode {self.c0_mode!r}")
        if len(self.window) != 2 or not self.window[1] > self.window[0] >= 0:
            raise ConfigError(f"bad fit window {self.window!r}")


@dataclass(frozen=True)
class DiagnosticsConfig:
    besov: tuple[TrackedNorm, ...] = ()
    k: int = 0
    linf: bool = False
    pressure: bool = False
    stability_pair: bool = False
    perturbation_size: float = 1e-6
    floor_tol: float = 0.1
    fits: tuple[FitRequest, ...] = ()


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs"
    prefix: str = ""


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    step: StepConfig
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def name(self) -> str:
        return self.output.prefix or self.scenario.name

    def with_output_dir(self, path: str | Path) -> RunConfig:
        return replace(self, output=replace(self.output, dir=str(path)))

    def as_dict(self) -> dict[str, Any]:
        sc = self.scenario
        st = self.step
        dg = self.diagnostics
        return {
            "grid": {"d": sc.d, "N": sc.N, "L": sc.L, "n_cut": sc.grid.n_cut},
            "scenario": {k: v for k, v in sc.as_dict().items()
                         if k not in ("d", "N", "L", "n_cut")},
            "step": {"dt": st.dt, "t_end": st.t_end, "output_stride": st.output_stride,
                     "scheme": st.scheme, "linear_only": st.linear_only,
                     "courant": st.courant},
            "diagnostics": {
                "besov": [f"{t.field}:{t.spec.s:g},{'inf' if t.spec.r == math.inf else 1},"
                          f"{t.spec.band}" for t in dg.besov],
                "k": dg.k, "linf": dg.linf, "pressure": dg.pressure,
                "stability_pair": dg.stability_pair,
                "perturbation_size": dg.perturbation_size,
                "floor_tol": dg.floor_tol,
                "fits": [{"column": f.column, "window": list(f.window),
                          "c0_mode": f.c0_mode, **({"c0": f.c0} if f.c0 is not None else {})}
                         for f in dg.fits],
            },
            "output": {"dir": self.output.dir, "prefix": self.output.prefix},
        }


_SECTIONS = {
    "grid": {"d", "N", "L", "n_cut"},
    "scenario": {f.name for f in fields(Scenario)} - {"d", "N", "L", "n_cut"},
    "step": {f.name for f in fields(StepConfig)},
    "diagnostics": {f.name for f in fields(DiagnosticsConfig)},
    "output": {f.name for f in fields(OutputConfig)},
}
_FIT_KEYS = {"column", "window", "c0_mode", "c0"}


def _check_keys(where: str, got: dict, allowed: set[str]) -> None:
    extra = sorted(set(got) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(extra)}")


def from_dict(doc: dict[str, Any]) -> RunConfig:
    _check_keys("top level", doc, set(_SECTIONS))
    for name in ("grid", "step"):
        if name not in doc:
            raise ConfigError(f"missing required section [{name}]")
    for name, allowed in _SECTIONS.items():
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        _check_keys(name, sec, allowed)
    try:
        scenario = Scenario(**doc.get("scenario", {}), **doc["grid"])
        step = StepConfig(**doc["step"])
        dg = dict(doc.get("diagnostics", {}))
        dg["besov"] = tuple(TrackedNorm.parse(s) for s in dg.get("besov", []))
        fits = []
        for f in dg.get("fits", []):
            if not isinstance(f, dict):
                raise ConfigError("each entry of diagnostics.fits must be a table")
            _check_keys("diagnostics.fits", f, _FIT_KEYS)
            fits.append(FitRequest(f["column"], tuple(f["window"]),
                                   f.get("c0_mode", "fit"), f.get("c0")))
        dg["fits"] = tuple(fits)
        diagnostics = DiagnosticsConfig(**dg)
        output = OutputConfig(**doc.get("output", {}))
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError, ScenarioError, GridError) as exc:
        raise ConfigError(str(exc)) from exc
    if diagnostics.k < 0:
        raise ConfigError("diagnostics.k must be >= 0")
    if diagnostics.perturbation_size < 0:
        raise ConfigError("perturbation_size must be >= 0")
    return RunConfig(scenario, step, diagnostics, output)


def load(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)


def builtin_names() -> list[str]:
    root = resources.files("pens") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def builtin_path(name: str):
    return resources.files("pens") / "scenarios" / f"{name}.toml"


def builtin_description(name: str) -> str:
    text = builtin_path(name).read_text(encoding="utf-8")
    first = text.splitlines()[0] if text else ""
    return first.lstrip("# ").strip()


def resolve(ref: str) -> RunConfig:
    """Load a config file, or a shipped scenario when ``ref`` names one."""
    p = Path(ref)
    if p.exists():
        return load(p)
    if ref in builtin_names():
        doc = tomli.loads(builtin_path(ref).read_text(encoding="utf-8"))
        return from_dict(doc)
    raise ConfigError(f"no config file or built-in scenario named {ref!r}")
