import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from pens.dynamics import Tendency, conserved_mass
from pens.initial_data import Scenario, generate
from pens.integrator import (DEGENERATE_THRESHOLD, NumericalAbort, StepConfig, cfl_limit,
                             damped_mode_propagator, evolve, integrate, propagator_entries,
                             step)
from pens.oracles import dense_matrix_exp, exact_heat, explicit_rk4_tiny
from pens.spectral import SpectralField, divergence_defect


def coupled_matrix(lam):
    return np.array([[-1.0, 1.0], [0.0, -lam]])


def state(seed=0, d=2, N=16, L=2.0, alpha=0.3, **kw):
    return generate(Scenario(d=d, N=N, L=L, n_cut=N // 3, seed=seed, alpha=alpha, **kw))


class TestPropagator:
    @pytest.mark.parametrize("lam", [0.0, 0.25, 1.0, 2.0, 37.5])
    @pytest.mark.parametrize("t", [0.0, 1e-3, 0.5, 4.0, 30.0])
    def test_matches_matrix_exponential(self, lam, t):
        a, b, c, e = propagator_entries(lam, t)
        ref = expm(coupled_matrix(lam) * t)
        np.testing.assert_allclose([a, b, c, e], ref.ravel(), rtol=1e-12, atol=1e-15)

    # near resonance the general-purpose expm loses digits, so the reference
    # values were computed once in 50-digit arithmetic and frozen here
    @pytest.mark.parametrize("lam,t,b_ref", [
        (1.0 - 1e-7, 4.0, 0.07326257020744978),
        (1.0 - 1e-7, 30.0, 2.807291101586597e-12),
        (1.0 + 3e-7, 4.0, 0.07326251159742098),
        (1.0 + 3e-7, 30.0, 2.807274257898945e-12),
    ])
    def test_near_resonance_high_precision(self, lam, t, b_ref):
        _, b, _, _ = propagator_entries(lam, t)
        assert b == pytest.approx(b_ref, rel=1e-14)

    def test_matches_pade_oracle_batched(self):
        lam = np.geomspace(1e-4, 1e3, 40)
        t = 2.5
        M = np.stack([coupled_matrix(x) for x in lam])
        ref = dense_matrix_exp(M, t)
        a, b, c, e = propagator_entries(lam, t)
        np.testing.assert_allclose(b, ref[:, 0, 1], rtol=1e-11, atol=1e-300)
        np.testing.assert_allclose(e, ref[:, 1, 1], rtol=1e-11, atol=1e-300)

    def test_degenerate_value(self):
        # lam = 1 gives the resonant entry t e^{-t}
        _, b, _, _ = propagator_entries(1.0, 3.0)
        assert b == pytest.approx(3.0 * math.exp(-3.0), rel=1e-15)

    def test_continuous_across_threshold(self):
        eps = DEGENERATE_THRESHOLD
        lam = np.array([1 - eps * 1.0001, 1 - eps * 0.9999, 1 + eps * 0.9999, 1 + eps * 1.0001])
        _, b, _, _ = propagator_entries(lam, 7.0)
        assert np.ptp(b) / b.mean() < 1e-5

    def test_no_overflow_for_stiff_modes(self):
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            a, b, c, e = propagator_entries(np.array([1e8]), np.array([200.0]))
        assert np.isfinite(b).all()
        assert b[0] == pytest.approx(math.exp(-200.0) / (1e8 - 1), rel=1e-12)
        assert e[0] == 0.0

    @pytest.mark.parametrize("lam,t", [(-1.0, 1.0), (1.0, -0.1)])
    def test_rejects_negative(self, lam, t):
        with pytest.raises(ValueError):
            propagator_entries(lam, t)


class TestDampedMode:
    @pytest.mark.parametrize("lam", [0.01, 0.5, 1.0, 3.0])
    def test_matches_transformed_system(self, lam):
        # (w - u, u) obey z' = -z + lam u, u' = -lam u
        t = 1.7
        ref = expm(np.array([[-1.0, lam], [0.0, -lam]]) * t)
        got = damped_mode_propagator(lam, t)
        np.testing.assert_allclose(got, ref.ravel(), rtol=1e-12, atol=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(lam=st.floats(0.0, 0.999), t=st.floats(0.0, 200.0))
    def test_low_frequency_bound(self, lam, t):
        _, g, _, e = damped_mode_propagator(lam, t)
        assert g <= t * e * (1 + 1e-12) + 1e-300


class TestStepConfig:
    @pytest.mark.parametrize("kwargs", [dict(dt=0, t_end=1), dict(dt=-1, t_end=1),
                                        dict(dt=math.inf, t_end=1), dict(dt=0.1, t_end=-1),
                                        dict(dt=0.1, t_end=1, output_stride=0),
                                        dict(dt=0.1, t_end=1, scheme="euler"),
                                        dict(dt=0.1, t_end=1, courant=0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            StepConfig(**kwargs)

    @pytest.mark.parametrize("dt,t_end,n", [(0.1, 1.0, 10), (0.3, 1.0, 4), (0.5, 0.0, 0),
                                            (0.1, 100.0, 1000)])
    def test_step_count(self, dt, t_end, n):
        assert StepConfig(dt, t_end).n_steps == n


class TestStepping:
    def test_linear_step_exact(self):
        s = state(seed=1)
        dt = 0.7
        out = step(s, StepConfig(dt, dt, linear_only=True))
        a, b, _, e = propagator_entries(s.grid.xi2, dt)
        np.testing.assert_allclose(out.w.coeffs, a * s.w.coeffs + b * s.u.coeffs, atol=1e-17)
        np.testing.assert_allclose(out.u.coeffs, e * s.u.coeffs, atol=1e-17)
        assert np.array_equal(out.rho.coeffs, s.rho.coeffs)

    def test_linear_steps_compose(self):
        s = state(seed=2)
        one = integrate(s, StepConfig(2.0, 2.0, linear_only=True))
        many = integrate(s, StepConfig(0.25, 2.0, linear_only=True))
        assert np.abs(one.w.coeffs - many.w.coeffs).max() < 1e-15
        assert np.abs(one.u.coeffs - many.u.coeffs).max() < 1e-15

    def test_against_rk4_oracle(self):
        s = state(seed=3)
        ref = explicit_rk4_tiny(s, 1e-3, 200)
        out = integrate(s, StepConfig(0.01, 0.2))
        scale = np.abs(ref.u.coeffs).max()
        assert np.abs(out.u.coeffs - ref.u.coeffs).max() < 1e-4 * scale
        assert np.abs(out.w.coeffs - ref.w.coeffs).max() < 1e-4 * np.abs(ref.w.coeffs).max()

    def test_second_order(self):
        s = state(seed=4, alpha=1.0)
        ref = explicit_rk4_tiny(s, 5e-4, 400)
        errs = []
        for dt in (0.04, 0.02, 0.01):
            out = integrate(s, StepConfig(dt, 0.2))
            errs.append(np.abs(out.w.coeffs - ref.w.coeffs).max())
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        assert all(3.0 < r < 5.0 for r in ratios), ratios

    def test_preserves_divergence_and_mass(self):
        s = state(seed=5, d=3, alpha=0.5)
        out = integrate(s, StepConfig(0.05, 0.5))
        assert divergence_defect(out.u) < 1e-12
        assert conserved_mass(out) == pytest.approx(conserved_mass(s), abs=1e-14)

    def test_zero_data_stays_zero(self):
        s = state(alpha=0.0, rho_style="zero", velocity_style="zero")
        out = integrate(s, StepConfig(0.1, 1.0))
        assert np.abs(out.w.coeffs).max() == 0 and np.abs(out.u.coeffs).max() == 0

    def test_abort_keeps_last_finite_state(self):
        s = state(seed=6)

        def bad_rhs(st):
            nan = SpectralField(st.grid, np.full_like(st.rho.coeffs, np.nan))
            zero_v = SpectralField.zeros(st.grid, st.grid.d)
            return Tendency(nan, zero_v, zero_v)

        with pytest.raises(NumericalAbort) as info:
            step(s, StepConfig(0.1, 1.0), rhs=bad_rhs)
        assert info.value.state is s


class TestEvolve:
    def test_output_times(self):
        s = state()
        times = [x.t for x in evolve(s, StepConfig(0.1, 1.0, output_stride=3, linear_only=True))]
        np.testing.assert_allclose(times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-15)

    def test_times_on_lattice(self):
        s = state()
        times = [x.t for x in evolve(s, StepConfig(0.1, 5.0, linear_only=True))]
        assert times == [i * 0.1 for i in range(51)]

    def test_zero_length(self):
        s = state()
        out = list(evolve(s, StepConfig(0.1, 0.0)))
        assert len(out) == 1 and out[0] is s


class TestCfl:
    def test_zero_velocity(self):
        s = state(alpha=0.0, rho_style="zero", velocity_style="zero")
        assert cfl_limit(s) == math.inf

    def test_shear_amplitude(self):
        s = state(alpha=0.2, rho_style="zero", velocity_style="single-mode")
        vmax = np.abs(s.u.physical()).max()
        expect = 0.5 / (vmax * s.grid.n_cut / s.grid.L)
        assert cfl_limit(s) == pytest.approx(expect)

    def test_acceptance_runs_are_stable(self):
        small = state(alpha=0.05, N=32, L=4.0)
        assert cfl_limit(small) > 0.1


class TestSpecExamples:
    def test_identity_at_zero(self):
        lam = np.linspace(0, 5, 11)
        a, b, c, e = propagator_entries(lam, 0.0)
        assert np.all(a == 1) and np.all(b == 0) and np.all(c == 0) and np.all(e == 1)

    def test_resonant_damped_entry(self):
        t = np.array([0.1, 1.0, 10.0])
        _, g, _, _ = damped_mode_propagator(1.0, t)
        np.testing.assert_allclose(g, t * np.exp(-t), rtol=1e-15)
        assert np.all(g <= 2 * t * np.exp(-t))

    def test_heat_flow_of_vortex(self):
        # with rho = 0 the vortex velocity solves the heat equation exactly
        s = state(alpha=0.01, N=32, L=1.0, rho_style="zero", velocity_style="taylor-green")
        out = integrate(s, StepConfig(0.05, 1.0))
        ref = exact_heat(s.u, 1.0)
        assert abs(out.u.l2_norm() - ref.l2_norm()) < 1e-8
        assert np.abs(out.u.coeffs - ref.coeffs).max() < 1e-12

    def test_mass_drift_one_step(self):
        s = state(seed=7, rho_style="nonneg-bump")
        out = step(s, StepConfig(0.1, 0.1))
        m0 = conserved_mass(s)
        assert abs(conserved_mass(out) - m0) <= 1e-12 * abs(m0)
