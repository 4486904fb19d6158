"""Lyapunov functionals, space-time norms and decay-exponent regression."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .dynamics import min_density, pressure_gradient
from .littlewood_paley import C_BERNSTEIN, BesovSpec, build_partition
from .spectral import FluidState, Grid, SpectralField

C_B = C_BERNSTEIN


# interpolation exponents used by the decay argument

def theta0(d: int) -> float:
    return 2.0 / (1 + d)


def theta(d: int) -> float:
    return (d - 2) / (2.0 * (d - 1))


def theta_k(d: int, k: int) -> float:
    return 2.0 / (d + k + 1)


def alpha_k(d: int, k: int) -> float:
    return (d / 2 - 1 + k) / (d - 1 + k)


def l2_rate(d: int) -> float:
    """Predicted L2 decay exponent of (w, u)."""
    return -d / 4


def damped_rate(d: int) -> float:
    """Predicted L2 decay exponent of w - u for d >= 3."""
    return -d * (d + 1) / (4.0 * (d - 1))


def besov_rate(d: int) -> float:
    return (1 - d) / 2


def lp_rate(d: int, k: int, p: float) -> float:
    """Predicted exponent for ||grad^{k-1}(w, u)||_{L^p}."""
    inv_p = 0.0 if p == math.inf else 1.0 / p
    return -d / 2 * (1 - inv_p) - (k - 1) / 2


class Shells:
    """Shell norms of one field, reusable across Besov indices."""

    def __init__(self, f: SpectralField):
        self.part = build_partition(f.grid)
        self.norms = self.part.shell_norms(f)

    def __call__(self, s: float, r: float = 1, band: str = "all") -> float:
        return self.part.combine(self.norms, BesovSpec(s, r, band))


def _diff(state: FluidState) -> SpectralField:
    return state.w - state.u


def lyapunov(state: FluidState, c_b: float = C_B) -> tuple[float, float]:
    d = state.grid.d
    w, u, z = Shells(state.w), Shells(state.u), Shells(_diff(state))
    L = u(d / 2 - 1) + w(d / 2 + 1) / (4 * c_b) + z(d / 2 - 1) / (2 * c_b**2)
    H = u(d / 2 + 1) / (4 * c_b) + w(d / 2 + 1) / (4 * c_b) + z(d / 2 - 1) / (4 * c_b**2)
    return L, H


def lyapunov_k(state: FluidState, k: int, c_b: float = C_B) -> tuple[float, float]:
    if k < 1:
        raise ValueError("regularity level k must be >= 1")
    d = state.grid.d
    L, H = lyapunov(state, c_b)
    w, u = Shells(state.w), Shells(state.u)
    L_k = L + w(d / 2 + 1 + k) / (2 * c_b**2) + u(d / 2 - 1 + k)
    H_k = H + w(d / 2 + 1 + k) / (2 * c_b**2) + u(d / 2 + 1 + k) / (2 * c_b)
    return L_k, H_k


def z0(state: FluidState) -> float:
    """Initial smallness functional ||rho|| + ||w|| (two indices) + ||u||."""
    d = state.grid.d
    w = Shells(state.w)
    return (Shells(state.rho)(d / 2) + w(d / 2 - 1) + w(d / 2 + 1)
            + Shells(state.u)(d / 2 - 1))


def negative_regularity(state: FluidState) -> float:
    """max of the B^{-d/2}_{2,inf} norms of w and u."""
    d = state.grid.d
    return max(Shells(state.w)(-d / 2, math.inf), Shells(state.u)(-d / 2, math.inf))


def stability_functional(delta: FluidState, c_b: float = C_B) -> float:
    """Difference functional for two solutions, evaluated on (drho, dw, du)."""
    d = delta.grid.d
    return (Shells(delta.rho)(d / 2 - 1) + Shells(delta.w)(d / 2)
            + Shells(delta.u)(d / 2 - 1) + Shells(_diff(delta))(d / 2 - 1) / (2 * c_b**2))


def fluctuation_l2(f: SpectralField) -> float:
    """L2 norm with the mean removed (homogeneous convention)."""
    c = f.coeffs.copy()
    c[(slice(None),) + f.grid.zero_mode] = 0
    return SpectralField(f.grid, c).l2_norm()


def linf_norm(f: SpectralField) -> float:
    phys = f.physical()
    return float(np.sqrt(np.sum(phys**2, axis=0)).max())


class ZTracker:
    """Running value of the global functional Z(t).

    Suprema are running maxima; time integrals use the trapezoid rule on the
    snapshot times fed to :meth:`update`.
    """

    def __init__(self, include_pressure: bool = False):
        self.include_pressure = include_pressure
        self._sup = np.zeros(4)
        self._int = 0.0
        self._last: tuple[float, np.ndarray] | None = None

    def update(self, state: FluidState) -> float:
        d = state.grid.d
        w, u, z = Shells(state.w), Shells(state.u), Shells(_diff(state))
        sup_terms = np.array([
            Shells(state.rho)(d / 2),
            w(d / 2 - 1) + w(d / 2 + 1),
            u(d / 2 - 1),
            z(d / 2 - 1),
        ])
        int_terms = np.array([w(d / 2 + 1) + u(d / 2 + 1), z(d / 2 - 1), 0.0])
        if self.include_pressure:
            int_terms[2] = Shells(pressure_gradient(state))(d / 2 - 1)
        self._sup = np.maximum(self._sup, sup_terms)
        integrand = float(int_terms.sum())
        if self._last is not None:
            t_prev, f_prev = self._last
            self._int += 0.5 * (state.t - t_prev) * (f_prev + integrand)
        self._last = (state.t, integrand)
        return self.value

    @property
    def value(self) -> float:
        return float(self._sup.sum() + self._int)


def z_functional(history: Sequence[FluidState], include_pressure: bool = False) -> np.ndarray:
    """Z(t_n) for every snapshot of the history."""
    tracker = ZTracker(include_pressure)
    return np.array([tracker.update(s) for s in history])


@dataclass
class LyapunovSample:
    t: float
    L: float
    H: float
    Z: float
    l2_w: float
    l2_u: float
    l2_diff: float
    min_rho: float
    norms: dict[str, float] = field(default_factory=dict)
    L_k: float | None = None
    H_k: float | None = None
    extra: dict[str, float] = field(default_factory=dict)

    @property
    def l2_wu(self) -> float:
        return math.hypot(self.l2_w, self.l2_u)


@dataclass(frozen=True)
class TrackedNorm:
    """A Besov spec applied to one of the fields rho, w, u or w - u."""

    field: str
    spec: BesovSpec

    def __post_init__(self):
        if self.field not in ("rho", "w", "u", "diff"):
            raise ValueError(f"unknown field {self.field!r}")

    @property
    def name(self) -> str:
        return f"{self.field}_{self.spec.name}"

    @classmethod
    def parse(cls, text: str) -> TrackedNorm:
        """``"u:0.5,1,low"`` -> u measured in B^{0.5}_{2,1} on low frequencies."""
        name, _, rest = text.partition(":")
        if not rest:
            raise ValueError(f"expected 'field:s,r,band', got {text!r}")
        return cls(name.strip(), BesovSpec.parse(rest))


class Sampler:
    """Builds one LyapunovSample per snapshot and tracks Z along the way."""

    def __init__(self, tracked: Sequence[TrackedNorm] = (), k: int = 0,
                 include_pressure: bool = False, linf: bool = False):
        self.tracked = list(tracked)
        self.k = k
        self.linf = linf
        self.z = ZTracker(include_pressure)

    def __call__(self, state: FluidState) -> LyapunovSample:
        L, H = lyapunov(state)
        Z = self.z.update(state)
        fields = {"rho": state.rho, "w": state.w, "u": state.u, "diff": _diff(state)}
        shells = {}
        norms = {}
        for tn in self.tracked:
            if tn.field not in shells:
                shells[tn.field] = Shells(fields[tn.field])
            sp = tn.spec
            norms[tn.name] = shells[tn.field](sp.s, sp.r, sp.band)
        sample = LyapunovSample(
            t=state.t, L=L, H=H, Z=Z,
            l2_w=fluctuation_l2(state.w), l2_u=fluctuation_l2(state.u),
            l2_diff=fluctuation_l2(fields["diff"]), min_rho=min_density(state),
            norms=norms)
        if self.k >= 1:
            sample.L_k, sample.H_k = lyapunov_k(state, self.k)
        d = state.grid.d
        sample.extra["negreg"] = negative_regularity(state)
        sample.extra["besov_wu"] = (Shells(state.w)(d / 2 + 1) + Shells(state.u)(d / 2 - 1))
        if self.linf:
            sample.extra["linf_w"] = linf_norm(state.w)
            sample.extra["linf_u"] = linf_norm(state.u)
            sample.extra["linf_wu"] = max(sample.extra["linf_w"], sample.extra["linf_u"])
        return sample


# decay regression

@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    exponent: float
    amplitude: float
    residual: float
    c0: float
    n_points: int

    def as_dict(self) -> dict:
        return {"window": list(self.window), "exponent": self.exponent,
                "amplitude": self.amplitude, "residual": self.residual,
                "c0": self.c0, "n_points": self.n_points}


C0_BOUNDS = (1e-2, 1e2)


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def fit_decay(t: Sequence[float], values: Sequence[float],
              window: tuple[float, float] | None = None,
              c0_mode: str = "fit", c0: float | None = None) -> DecayFit:
    """Least-squares slope of log(value) against log(1 + c0 t).

    ``c0_mode`` is ``"fit"`` (bounded 1-D search over log c0 minimizing the
    residual), ``"unit"`` (c0 = 1) or ``"given"`` (use ``c0``).
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("time and value series differ in length")
    if window is None:
        window = (float(t.min()), float(t.max()))
    t_a, t_b = map(float, window)
    if not (t_b > t_a >= 0):
        raise ValueError(f"degenerate window [{t_a}, {t_b}]")
    sel = (t >= t_a - 1e-12) & (t <= t_b + 1e-12)
    if sel.sum() < 3:
        raise ValueError("fewer than three samples inside the window")
    ts, vs = t[sel], v[sel]
    if np.any(~(vs > 0)) or not np.all(np.isfinite(vs)):
        raise ValueError("values must be finite and positive on the fit window")
    y = np.log(vs)

    def at(c):
        slope, icpt, res = _linear_fit(np.log1p(c * ts), y)
        return slope, icpt, res

    if c0_mode == "unit":
        c = 1.0
    elif c0_mode == "given":
        if c0 is None or not c0 > 0:
            raise ValueError("c0_mode='given' needs a positive c0")
        c = float(c0)
    elif c0_mode == "fit":
        lo, hi = np.log(C0_BOUNDS[0]), np.log(C0_BOUNDS[1])
        res = optimize.minimize_scalar(lambda lc: at(math.exp(lc))[2],
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-6})
        c = float(math.exp(res.x))
    else:
        raise ValueError(f"unknown c0_mode {c0_mode!r}")
    slope, icpt, res = at(c)
    return DecayFit((t_a, t_b), slope, math.exp(icpt), res, c, int(sel.sum()))


# monitors

@dataclass(frozen=True)
class MonotonicityReport:
    max_excess: float
    max_rate: float
    worst_time: float

    def as_dict(self) -> dict:
        return {"max_excess": self.max_excess, "max_rate": self.max_rate,
                "worst_time": self.worst_time}


def monotonicity_check(t: Sequence[float], L: Sequence[float],
                       H: Sequence[float]) -> MonotonicityReport:
    """Excess of L(t_{n+1}) - L(t_n) + int H over consecutive snapshots.

    ``max_excess`` is the largest positive excess of a single interval,
    ``max_rate`` the largest excess divided by the interval length.
    """
    t, L, H = (np.asarray(a, dtype=float) for a in (t, L, H))
    if len(t) < 2:
        return MonotonicityReport(0.0, 0.0, float(t[0]) if len(t) else 0.0)
    dt = np.diff(t)
    excess = np.diff(L) + 0.5 * dt * (H[1:] + H[:-1])
    excess = np.maximum(excess, 0.0)
    rate = excess / dt
    i = int(np.argmax(rate))
    return MonotonicityReport(float(excess.max()), float(rate.max()), float(t[i + 1]))


def tail_integral(beta: float, c0: float, t: float, c: float = 1.0) -> float:
    """int_0^t ((1 + c0 t)/(1 + c0 tau))^beta e^{-c (t - tau)} dtau."""
    if t == 0:
        return 0.0
    f = lambda tau: ((1 + c0 * t) / (1 + c0 * tau)) ** beta * math.exp(-c * (t - tau))
    # the integrand is concentrated near tau = t; split to help the quadrature
    a = max(0.0, t - 50.0 / c)
    head = integrate.quad(f, 0.0, a, limit=200)[0] if a > 0 else 0.0
    tail = integrate.quad(f, a, t, limit=200)[0]
    return head + tail


def tail_integral_sup(beta: float, c0: float, t_max: float = 200.0,
                      c: float = 1.0, n: int = 400) -> float:
    ts = np.linspace(0.0, t_max, n + 1)[1:]
    return max(tail_integral(beta, c0, float(x), c) for x in ts)


@dataclass(frozen=True)
class NashReport:
    slope: float
    exponent_a: float
    exponent_b: float
    closer: str

    def as_dict(self) -> dict:
        return {"slope": self.slope, "exponent_1_minus_theta0": self.exponent_a,
                "exponent_inverse": self.exponent_b, "closer": self.closer}


def nash_monitor(L: Sequence[float], H: Sequence[float], d: int) -> NashReport:
    """Regress log H on log L and compare with the two readings of the
    interpolation inequality, H >~ L^{1-theta0} and H >~ L^{1/(1-theta0)}."""
    L, H = np.asarray(L, float), np.asarray(H, float)
    ok = (L > 0) & (H > 0)
    if ok.sum() < 3:
        raise ValueError("need at least three positive (L, H) pairs")
    slope, _, _ = _linear_fit(np.log(L[ok]), np.log(H[ok]))
    a = 1 - theta0(d)
    b = 1 / (1 - theta0(d))
    closer = "1-theta0" if abs(slope - a) <= abs(slope - b) else "1/(1-theta0)"
    return NashReport(slope, a, b, closer)


def lattice_heat_deficit(grid: Grid, t: float) -> float:
    """1 - (lattice sum of e^{-2 t |xi|^2} over xi != 0) / (continuum value).

    The continuum value is L^d (pi / (2 t))^{d/2}.  Once this deficit is
    sizeable the missing low frequencies of the finite box dominate and
    power-law decay measurements stop being meaningful.  The sum runs over
    the whole integer lattice, not just the resolved modes, so the deficit
    measures the box size alone and increases with t.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    # terms beyond exp(-60) are below double precision relative to the k=0 term
    k_max = int(math.ceil(grid.L * math.sqrt(60.0 / (2 * t)))) + 1
    k1 = np.arange(-k_max, k_max + 1) / grid.L
    s1 = np.exp(-2 * t * k1**2).sum()
    lattice = s1**grid.d - 1.0
    continuum = grid.L**grid.d * (math.pi / (2 * t)) ** (grid.d / 2)
    return 1.0 - lattice / continuum


def box_floor_time(grid: Grid, tol: float = 0.1, t_max: float = 1e6) -> float:
    """First time at which the lattice heat deficit exceeds ``tol``."""
    lo, hi = 1e-3, t_max
    if lattice_heat_deficit(grid, hi) <= tol:
        return math.inf
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if lattice_heat_deficit(grid, mid) > tol:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-9:
            break
    return hi


def plateau_time(t: Sequence[float], values: Sequence[float],
                 rel_floor: float = 1e-12) -> float:
    """First time the series drops below rel_floor * max (round-off floor)."""
    t, v = np.asarray(t, float), np.asarray(values, float)
    if len(v) == 0 or v.max() <= 0:
        return float(t[0]) if len(t) else 0.0
    below = np.flatnonzero(v <= rel_floor * v.max())
    return float(t[below[0]]) if len(below) else math.inf


def usable_window(t: Sequence[float], values: Sequence[float], grid: Grid,
                  window: tuple[float, float], tol: float = 0.1) -> tuple[tuple[float, float], str]:
    """Clip the requested window at the box floor or a round-off plateau.

    Returns the clipped window and the reason for clipping (``"none"``,
    ``"box-floor"`` or ``"plateau"``).
    """
    t_a, t_b = window
    t_box = box_floor_time(grid, tol)
    t_plat = plateau_time(t, values)
    end, reason = t_b, "none"
    if t_box < end:
        end, reason = t_box, "box-floor"
    if t_plat < end:
        end, reason = t_plat, "plateau"
    return (t_a, end), reason
