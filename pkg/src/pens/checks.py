"""Oracle cross-checks shared by the ``sweep-g`` / ``validate`` verbs and tests."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .diagnostics import lyapunov
from .initial_data import Scenario, generate
from .integrator import StepConfig, damped_mode_propagator, integrate, propagator_entries
from .littlewood_paley import BesovSpec, besov_norm, build_partition
from .oracles import dense_matrix_exp, direct_besov, exact_heat, explicit_rk4_tiny


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status}  {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def sweep_g(n_t: int = 200, n_lam: int = 200, t_max: float = 50.0) -> dict:
    """Compare the closed-form damped-mode entry g with the dense oracle and
    measure max |g| / (2 t e^{-t lam}) on log-spaced t and lam in (0, 1)."""
    start = time.perf_counter()
    t = np.logspace(-3, np.log10(t_max), n_t)
    lam = np.linspace(0.0, 1.0, n_lam + 2)[1:-1]
    T, LAM = np.meshgrid(t, lam, indexing="ij")
    _, g, _, _ = damped_mode_propagator(LAM, T)
    M = np.zeros(T.shape + (2, 2))
    M[..., 0, 0] = 1.0
    M[..., 0, 1] = -LAM
    M[..., 1, 1] = LAM
    E = dense_matrix_exp(-M * T[..., None, None])
    err = float(np.max(np.abs(E[..., 0, 1] - g)))
    ratio = float(np.max(np.abs(g) / (2 * T * np.exp(-T * LAM))))
    return {"max_abs_error": err, "max_ratio": ratio, "n_t": n_t, "n_lam": n_lam,
            "t_max": t_max, "runtime_s": time.perf_counter() - start}


def _propagator_check() -> float:
    lam = np.concatenate([np.linspace(0, 2, 41), [1 - 1e-6, 1 + 1e-6, 1 - 2e-6, 10, 100]])
    t = np.linspace(0.01, 10, 25)
    T, LAM = np.meshgrid(t, lam, indexing="ij")
    a, b, _, e = propagator_entries(LAM, T)
    M = np.zeros(T.shape + (2, 2))
    M[..., 0, 0] = 1.0
    M[..., 0, 1] = -1.0
    M[..., 1, 1] = LAM
    E = dense_matrix_exp(-M * T[..., None, None])
    return float(max(np.abs(E[..., 0, 0] - a).max(), np.abs(E[..., 0, 1] - b).max(),
                     np.abs(E[..., 1, 1] - e).max(), np.abs(E[..., 1, 0]).max()))


def _besov_check() -> float:
    state = generate(Scenario(d=3, N=16, L=2.0, seed=3))
    worst = 0.0
    for f in (state.rho, state.w, state.u):
        for s, r, band in [(0.5, 1, "all"), (-1.5, np.inf, "all"), (2.5, 1, "high"),
                           (0.5, 1, "low")]:
            fast = besov_norm(f, BesovSpec(s, r, band))
            slow = direct_besov(f, s, r, band)
            worst = max(worst, abs(fast - slow) / max(slow, 1e-300))
    return worst


def _linear_step_check() -> float:
    state = generate(Scenario(d=2, N=16, L=2.0, seed=5))
    cfg = StepConfig(0.05, 1.0, linear_only=True)
    fast = integrate(state, cfg)
    a, b, _, e = propagator_entries(state.grid.xi2, 1.0)
    w = a * state.w.coeffs + b * state.u.coeffs
    u = e * state.u.coeffs
    return float(max(np.abs(fast.w.coeffs - w).max(), np.abs(fast.u.coeffs - u).max()))


def _heat_check() -> float:
    # with rho = 0 the u equation decouples from w; for 2D Taylor-Green data
    # P (u . grad) u vanishes, so the flow is exactly the heat flow
    sc = Scenario(d=2, N=32, L=2.0, rho_style="zero", velocity_style="taylor-green",
                  alpha=0.05)
    st = generate(sc)
    out = integrate(st, StepConfig(0.01, 1.0))
    ref = exact_heat(st.u, 1.0)
    return abs(out.u.l2_norm() - ref.l2_norm())


def _rk4_check() -> float:
    state = generate(Scenario(d=2, N=16, L=2.0, seed=11, alpha=0.5))
    ref = explicit_rk4_tiny(state, 0.005, 100)
    fast = integrate(state, StepConfig(0.01, 0.5))
    diff = max(np.abs(ref.w.coeffs - fast.w.coeffs).max(),
               np.abs(ref.u.coeffs - fast.u.coeffs).max(),
               np.abs(ref.rho.coeffs - fast.rho.coeffs).max())
    scale = max(np.abs(state.w.coeffs).max(), np.abs(state.u.coeffs).max())
    return float(diff / scale)


def _partition_check() -> float:
    return max(build_partition(generate(Scenario(d=d, N=32, L=4.0)).grid).unity_defect()
               for d in (2, 3))


def _lyapunov_zero_check() -> float:
    sc = Scenario(d=2, N=16, L=2.0, rho_style="zero", velocity_style="zero", alpha=0.0)
    L, H = lyapunov(generate(sc))
    return abs(L) + abs(H)


def validate() -> list[CheckResult]:
    sweep = sweep_g()
    return [
        CheckResult("propagator vs dense matrix exponential", _propagator_check(), 1e-10),
        CheckResult("damped-mode g vs dense matrix exponential", sweep["max_abs_error"], 1e-10),
        CheckResult("max |g| / (2 t e^{-t lam}) minus one", max(sweep["max_ratio"] - 1, 0.0), 0.0),
        CheckResult("partition of unity defect", _partition_check(), 1e-10),
        CheckResult("besov_norm vs direct per-frequency oracle", _besov_check(), 1e-10),
        CheckResult("linear-only stepping vs exact propagator", _linear_step_check(), 1e-12),
        CheckResult("heat-only run vs exact heat solution", _heat_check(), 1e-8),
        CheckResult("IF-Heun vs explicit RK4 oracle (relative)", _rk4_check(), 1e-3),
        CheckResult("Lyapunov functionals of the zero state", _lyapunov_zero_check(), 0.0),
    ]
