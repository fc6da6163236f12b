import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gevnodal.coeffs import GevreyParams, make_coefficients, synth_coefficients, zero_coefficients
from gevnodal.errors import ConfigError, ZeroFieldError
from gevnodal.fourier import SpectralField, l2_norm
from gevnodal.solver import (
    SolverConfig,
    dirichlet_quotient,
    heat_semigroup_gevrey_max,
    solve,
    step,
    verify_gevrey_smoothing,
    verify_lower_bound,
    write_diagnostics_csv,
)

from fields import random_field

SIN3 = SpectralField.from_modes(1, 3, {3: -0.5j, -3: 0.5j})
HEAT = zero_coefficients(1)


def v_one():
    one = SpectralField.from_modes(1, 1, {0: 1.0})
    return make_coefficients(one, (SpectralField.zeros(1, 1),), GevreyParams(1.0, 0.1))


def rel(a: SpectralField, b: SpectralField) -> float:
    return l2_norm(a - b) / l2_norm(b)


class TestConfig:
    def test_times_increasing(self):
        with pytest.raises(ConfigError):
            SolverConfig(0.01, 1.0, (0.2, 0.1))

    def test_times_within_horizon(self):
        with pytest.raises(ConfigError):
            SolverConfig(0.01, 0.1, (0.2,))
        with pytest.raises(ConfigError):
            SolverConfig(0.01, 0.1, (0.0, 0.1))

    def test_dt_below_spacing(self):
        with pytest.raises(ConfigError):
            SolverConfig(0.05, 1.0, (0.1, 0.12))

    def test_accuracy_constraint(self):
        with pytest.raises(ConfigError):
            solve(SIN3, v_one(), SolverConfig(0.2, 0.2, (0.2,)))


class TestStep:
    def test_pure_heat_exact(self):
        out = step(SIN3, HEAT, 0.01)
        assert rel(out, SIN3.scale(math.exp(-0.09))) < 1e-15

    def test_zero_stays_zero(self):
        assert step(SpectralField.zeros(1, 3), v_one(), 0.01).is_zero()

    def test_v_one_closed_form(self):
        assert rel(step(SIN3, v_one(), 0.01), SIN3.scale(math.exp(-0.08))) < 1e-10

    def test_advection_translates(self):
        # u_t = u_xx + u_x: exact solution sin(3(x + t)) e^{-9t}
        one = SpectralField.from_modes(1, 1, {0: 1.0})
        cs = make_coefficients(SpectralField.zeros(1, 1), (one,), GevreyParams(1.0, 0.1))
        rec = solve(SIN3, cs, SolverConfig(1e-3, 0.1, (0.1,)))
        exact = SpectralField.from_modes(1, 3, {3: -0.5j * np.exp(0.3j), -3: 0.5j * np.exp(-0.3j)})
        assert rel(rec.snapshots[0].u, exact.scale(math.exp(-0.9))) < 1e-9


class TestSolve:
    def test_heat_l2(self):
        rec = solve(SIN3, HEAT, SolverConfig(1e-3, 0.1, (0.1,)))
        assert rec.snapshots[0].l2 == pytest.approx(math.sqrt(math.pi) * math.exp(-0.9), rel=1e-12)
        assert rec.snapshots[0].l2 == pytest.approx(0.720626, abs=1e-6)

    def test_eigenfunction_quotient(self):
        rec = solve(SIN3, HEAT, SolverConfig(0.01, 0.5, (0.1, 0.3, 0.5)))
        np.testing.assert_allclose(rec.qD, 9.0, rtol=1e-14)
        assert rec.q0 == pytest.approx(9.0)

    def test_two_mode_collapse(self):
        u0 = SpectralField.from_modes(1, 2, {1: -.5j, -1: .5j, 2: -.5j, -2: .5j})
        t = np.linspace(0.2, 4.0, 20)
        rec = solve(u0, HEAT, SolverConfig(0.05, 4.0, tuple(t)))
        closed = (np.exp(-2 * t) + 4 * np.exp(-8 * t)) / (np.exp(-2 * t) + np.exp(-8 * t))
        np.testing.assert_allclose(rec.qD, closed, rtol=1e-12)
        assert np.all(np.diff(rec.qD) < 0) and rec.qD[-1] == pytest.approx(1, abs=1e-8)

    def test_zero_data_rejected(self):
        with pytest.raises(ZeroFieldError):
            solve(SpectralField.zeros(1, 3), HEAT, SolverConfig(0.01, 0.1, (0.1,)))

    def test_dim_mismatch(self):
        with pytest.raises(ConfigError):
            solve(SIN3, zero_coefficients(2), SolverConfig(0.01, 0.1, (0.1,)))

    def test_fourth_order(self):
        errs = []
        for dt in (0.05, 0.025, 0.0125):
            rec = solve(SIN3, v_one(), SolverConfig(dt, 0.1, (0.1,)))
            errs.append(rel(rec.snapshots[0].u, SIN3.scale(math.exp(-0.8))))
        assert 14 <= errs[0] / errs[1] <= 18 and 14 <= errs[1] / errs[2] <= 18

    @given(st.integers(0, 2**31), st.integers(1, 16))
    def test_pure_heat_quotient_nonincreasing(self, seed, J):
        u0 = random_field(np.random.default_rng(seed), 1, J)
        rec = solve(u0, HEAT, SolverConfig(0.02, 1.0, tuple(np.linspace(0.05, 1.0, 12))))
        q = np.concatenate([[rec.qD_0], rec.qD])
        assert np.all(np.diff(q) <= 1e-12 * q[:-1] + 1e-300)
        assert np.all(rec.qD >= 0)

    @given(st.integers(0, 2**31), st.sampled_from([1, 2]))
    def test_eigenfunction_exact_any_dt(self, seed, dim):
        rng = np.random.default_rng(seed)
        j = tuple(int(x) for x in rng.integers(1, 6, dim))
        mj = tuple(-x for x in j)
        u0 = SpectralField.from_modes(dim, 6, {j if dim > 1 else j[0]: 1.0, mj if dim > 1 else mj[0]: 1.0})
        dt = float(rng.uniform(0.001, 0.07))
        rec = solve(u0, zero_coefficients(dim), SolverConfig(dt, 0.3, (0.3,)))
        k2 = sum(x * x for x in j)
        assert rel(rec.snapshots[0].u, u0.scale(math.exp(-k2 * 0.3))) < 1e-14

    def test_bit_reproducible(self):
        cs = synth_coefficients(2, 1, 6, GevreyParams(1.0, 0.1), 2.0, 0.3)
        u0 = random_field(np.random.default_rng(9), 1, 16)
        cfg = SolverConfig(0.005, 0.2, (0.1, 0.2))
        a, b = solve(u0, cs, cfg), solve(u0, cs, cfg)
        assert a.l2.tobytes() == b.l2.tobytes()
        np.testing.assert_array_equal(a.snapshots[-1].u.coeffs, b.snapshots[-1].u.coeffs)

    def test_two_dimensional_synthesized(self):
        cs = synth_coefficients(4, 2, 4, GevreyParams(1.0, 0.1), 2.0, 0.2)
        u0 = random_field(np.random.default_rng(4), 2, 8)
        rec = solve(u0, cs, SolverConfig(0.4 / (cs.M1 * 8 + cs.M0), 0.1, (0.05, 0.1)))
        assert verify_lower_bound(rec, cs.M0, cs.M1, rec.q0).passed


class TestDirichlet:
    def test_examples(self):
        assert dirichlet_quotient(SIN3) == pytest.approx(9)
        assert dirichlet_quotient(SpectralField.from_modes(1, 1, {0: 2.0})) == 0
        u = SpectralField.from_modes(1, 2, {1: -.5j, -1: .5j, 2: -.5j, -2: .5j})
        assert dirichlet_quotient(u) == pytest.approx(2.5)

    def test_zero_field(self):
        with pytest.raises(ZeroFieldError):
            dirichlet_quotient(SpectralField.zeros(1, 2))


class TestLowerBound:
    def test_sin3_closed_form_margin(self):
        t = (0.05, 0.1, 0.2)
        rec = solve(SIN3, HEAT, SolverConfig(0.01, 0.2, t))
        rep = verify_lower_bound(rec, 1, 1, 9)
        assert rep.passed
        np.testing.assert_allclose(rep.margins, [4 * x for x in t], rtol=1e-10)

    def test_constant_data(self):
        u0 = SpectralField.from_modes(1, 1, {0: 1.0})
        rec = solve(u0, HEAT, SolverConfig(0.01, 0.2, (0.1, 0.2)))
        rep = verify_lower_bound(rec, 1, 1, rec.q0)
        np.testing.assert_allclose(rep.margins, [2 * x * 2 for x in (0.1, 0.2)], rtol=1e-10)

    def test_forced_violation(self):
        rec = solve(SIN3, HEAT, SolverConfig(0.01, 0.2, (0.05, 0.1, 0.2)))
        rep = verify_lower_bound(rec, 1, 1, 0)
        assert not rep.passed and all(m < 0 for m in rep.margins)

    @given(st.integers(0, 2**31))
    def test_certified_runs_pass(self, seed):
        cs = synth_coefficients(seed, 1, 6, GevreyParams(1.0, 0.1), 2.0, 0.5)
        u0 = random_field(np.random.default_rng(seed), 1, 24)
        dt = min(0.01, 0.45 / (cs.M1 * 24 + cs.M0))
        rec = solve(u0, cs, SolverConfig(dt, 0.2, (0.02, 0.1, 0.2)))
        assert verify_lower_bound(rec, cs.M0, cs.M1, rec.q0).passed


class TestGevreySmoothing:
    def test_oracle_examples(self):
        assert heat_semigroup_gevrey_max(0.01, 0.1, 1.0, 64) == pytest.approx(0.25)
        assert heat_semigroup_gevrey_max(0.01, 0.0, 1.0, 64) == 0.0
        r = [heat_semigroup_gevrey_max(t, 0.1, 1.0, 10**5) / (0.01 / (4 * t)) for t in (1e-3, 1e-5)]
        assert abs(r[1] - 1) < abs(r[0] - 1) + 1e-15 and abs(r[1] - 1) < 1e-6

    def test_pure_heat_fitted_scale(self):
        from gevnodal.experiment import flat_spectrum
        t = tuple(np.geomspace(0.01, 0.1, 6))
        rec = solve(flat_spectrum(0, 1, 64), HEAT, SolverConfig(0.005, 0.1, t, None, ((0.1, 1.0),)))
        rep = verify_gevrey_smoothing(rec, 0.1, 1.0, C1=0.0)
        # envelope delta^2/t; the oracle scale is 1/4
        assert 0.25 / 5 <= rep.fitted_a <= 0.25 * 5

    def test_single_mode_constant(self):
        u0 = SpectralField.from_modes(1, 1, {1: 0.5, -1: 0.5})
        t = (0.01, 0.05, 0.1)
        rec = solve(u0, HEAT, SolverConfig(0.01, 0.1, t, None, ((0.1, 1.0),)))
        rep = verify_gevrey_smoothing(rec, 0.1, 1.0, 1.0)
        np.testing.assert_allclose(rep.g, 0.1, rtol=1e-13)

    def test_synthesized_coefficients(self):
        cs = synth_coefficients(0, 1, 8, GevreyParams(1.0, 0.05), 2.0, 0.2)
        from gevnodal.experiment import flat_spectrum
        J = 32
        dt = min(0.005, 0.45 / (cs.M1 * J + cs.M0))
        t = tuple(np.geomspace(0.01, 0.1, 6))
        rec = solve(flat_spectrum(1, 1, J), cs, SolverConfig(dt, 0.1, t, None, ((0.05, 1.0),)))
        C1 = cs.Kw**2 + cs.Kv + cs.M1 + cs.M0 + rec.q0
        rep = verify_gevrey_smoothing(rec, 0.05, 1.0, C1)
        assert 0 < rep.fitted_a <= 10

    def test_capped_radius_skipped(self):
        rec = solve(SIN3.with_cutoff(100), HEAT, SolverConfig(0.004, 0.1, (0.1,), None, ((8.0, 1.0),)))
        rep = verify_gevrey_smoothing(rec, 8.0, 1.0, 1.0)
        assert rep.skipped == [0.1] and rep.times == []

    def test_missing_radius(self):
        rec = solve(SIN3, HEAT, SolverConfig(0.01, 0.1, (0.1,)))
        with pytest.raises(KeyError):
            verify_gevrey_smoothing(rec, 0.1, 1.0, 1.0)


def test_diagnostics_csv(tmp_path):
    rec = solve(SIN3, HEAT, SolverConfig(0.01, 0.2, (0.1, 0.2), None, ((0.1, 1.0),)))
    path = tmp_path / "d.csv"
    write_diagnostics_csv(path, rec)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,l2,qD,gevrey_0.1_1"
    t, l2, qd, g = (float(x) for x in lines[1].split(","))
    assert (t, l2, qd) == (0.1, rec.snapshots[0].l2, rec.snapshots[0].qD)
    assert g == pytest.approx(math.exp(rec.snapshots[0].gevrey[(0.1, 1.0)]), rel=1e-15)
