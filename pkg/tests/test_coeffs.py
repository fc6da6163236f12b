import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gevnodal.coeffs import (
    GevreyParams,
    certified_sup,
    certify_constants,
    check_time_horizon,
    gevrey_sobolev_norm,
    make_coefficients,
    read_bundle,
    synth_coefficients,
    synth_random_gevrey,
    write_bundle,
    zero_coefficients,
)
from gevnodal.errors import GevreyOverflowError, NotInClassError
from gevnodal.fourier import SpectralField, to_grid

from fields import random_field

P = GevreyParams(1.0, 0.1)
COSX_2D = SpectralField.from_modes(2, 1, {(1, 0): 0.5, (-1, 0): 0.5})
ZERO_2D = SpectralField.zeros(2, 1)


def test_params_validation():
    for beta, delta in ((0.0, 0.1), (1.2, 0.1), (0.5, 0.0)):
        with pytest.raises(ValueError):
            GevreyParams(beta, delta)


class TestSynthesis:
    def test_amplitude_zero(self):
        assert synth_random_gevrey(1, P, 2.0, 8, 0.0).is_zero()

    def test_deterministic(self):
        a = synth_random_gevrey(7, P, 2.0, 8, 1.0, dim=2)
        b = synth_random_gevrey(7, P, 2.0, 8, 1.0, dim=2)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)

    def test_margin_must_exceed_one(self):
        with pytest.raises(ValueError):
            synth_random_gevrey(0, P, 1.0, 8, 1.0)

    def test_overflow_guard(self):
        with pytest.raises(GevreyOverflowError):
            synth_random_gevrey(0, GevreyParams(1.0, 50.0), 2.0, 10, 1.0)

    def test_gevrey_norm_monte_carlo(self):
        params = GevreyParams(1.0, 0.2)
        J, amp = 32, 1.0
        ref = amp * np.sum(np.exp(-0.2 * np.abs(np.arange(-J, J + 1)))) * 3
        from gevnodal.fourier import apply_gevrey_multiplier, l2_norm
        ok = 0
        for seed in range(100):
            f = synth_random_gevrey(seed, params, 2.0, J, amp)
            # e^{delta A^{1/2}} norm, measured the same way as the certified constants
            n = l2_norm(apply_gevrey_multiplier(f, 0.2, 1.0))
            ok += math.isfinite(n) and n <= ref
        assert ok >= 99


class TestCertification:
    def test_cosx_M0(self):
        M0, _, _, _ = certify_constants(COSX_2D, (ZERO_2D, ZERO_2D), P)
        assert M0 == 1.0

    def test_sinx_drift_M1(self):
        w1 = SpectralField.from_modes(2, 1, {(1, 0): -0.5j, (-1, 0): 0.5j})
        _, M1, _, _ = certify_constants(ZERO_2D, (w1, ZERO_2D), P)
        assert M1 == pytest.approx(2.0, abs=1e-12)

    def test_cosx_Kv_closed_form(self):
        _, _, Kv, _ = certify_constants(COSX_2D, (ZERO_2D, ZERO_2D), P)
        assert Kv == pytest.approx(2 * math.exp(0.1) * math.pi * math.sqrt(2), rel=1e-13)  # 9.820

    def test_Kw_vector_norm(self):
        _, _, Kv, _ = certify_constants(COSX_2D, (ZERO_2D, ZERO_2D), P)
        _, _, _, Kw = certify_constants(ZERO_2D, (COSX_2D, COSX_2D), P)
        assert Kw == pytest.approx(math.sqrt(2) * Kv, rel=1e-14)

    def test_zero_coefficients_clamped(self):
        cs = zero_coefficients(2)
        assert (cs.M0, cs.M1, cs.Kv, cs.Kw) == (1.0, 1.0, 0.0, 0.0)
        assert cs.is_zero()

    def test_wrong_drift_arity(self):
        with pytest.raises(ValueError):
            certify_constants(COSX_2D, (ZERO_2D,), P)

    @given(st.integers(0, 2**31), st.sampled_from([1, 2]), st.integers(1, 12))
    def test_M0_dominates_grid_sup(self, seed, dim, J):
        v = random_field(np.random.default_rng(seed), dim, J)
        bound = certified_sup([v])
        for N in (4 * J, 8 * J, 16 * J):
            N = max(N, 2 * J + 2)
            assert bound >= np.abs(to_grid(v, N).values).max() * (1 - 1e-12)

    @given(st.integers(0, 2**31), st.integers(1, 10))
    def test_certified_sup_bounds_off_grid_values(self, seed, J):
        v = random_field(np.random.default_rng(seed), 1, J)
        x = np.random.default_rng(seed + 1).uniform(0, 2 * math.pi, 2000)
        from gevnodal.fourier import evaluate
        assert certified_sup([v]) >= np.abs(evaluate(v, x)).max() * (1 - 1e-12)

    @given(st.integers(0, 2**31), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
    def test_Kv_monotone_in_delta(self, seed, d1, d2):
        v = random_field(np.random.default_rng(seed), 2, 6)
        lo, hi = sorted((d1, d2))
        assert gevrey_sobolev_norm(v, GevreyParams(1.0, lo)) <= gevrey_sobolev_norm(
            v, GevreyParams(1.0, hi)) * (1 + 1e-14)

    @pytest.mark.parametrize("beta", [0.5, 1.0])
    def test_success_at_delta_failure_far_beyond(self, beta):
        params = GevreyParams(beta, 0.5)
        J = 40
        f = synth_random_gevrey(3, params, 2.0, J, 1.0)
        assert math.isfinite(gevrey_sobolev_norm(f, params))
        big = 700.0 / J**beta * 1.5
        with pytest.raises(NotInClassError):
            gevrey_sobolev_norm(f, GevreyParams(beta, big))


class TestHorizon:
    def test_examples(self):
        assert check_time_horizon(0.1, 1, 2)
        assert not check_time_horizon(0.6, 1, 2)
        assert check_time_horizon(1 / 8, 2, 2)

    def test_C_below_two(self):
        with pytest.raises(ValueError):
            check_time_horizon(0.1, 1, 1.5)


def test_bundle_round_trip(tmp_path):
    cs = synth_coefficients(5, 2, 4, P, 2.0, 0.3)
    write_bundle(tmp_path, cs)
    back = read_bundle(tmp_path)
    np.testing.assert_array_equal(back.v.coeffs, cs.v.coeffs)
    for a, b in zip(back.w, cs.w):
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
    assert (back.M0, back.M1, back.Kv, back.Kw, back.seed) == (cs.M0, cs.M1, cs.Kv, cs.Kw, 5)
    manifest = (tmp_path / "manifest.txt").read_text()
    for key in ("beta", "delta", "M0", "M1", "Kv", "Kw", "seed"):
        assert f"{key}=" in manifest


def test_make_coefficients_recomputes_constants():
    cs = make_coefficients(COSX_2D, (COSX_2D, ZERO_2D), P)
    assert cs.M1 >= 2.0 - 1e-12
    assert cs.time_independent
