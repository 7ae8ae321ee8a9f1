import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from vgwarp.exceptions import DegenerateVariogramError, ParameterError
from vgwarp.registration import (
    WarpingFunction,
    beta_cdf_warp,
    compose,
    dp_align,
    exponential_warp,
    invert_warp,
    mean_warp,
    register_set,
    smooth_and_extend,
    srvf_to_curve,
    standardize,
    to_srvf,
    warp_srvf,
)
from vgwarp.variogram import SampledFunction, VariogramModel, sample_on_grid

T = np.linspace(0, 1, 257)


class TestSrvf:
    def test_square(self):
        q = to_srvf(T ** 2).q
        assert_allclose(q, np.sqrt(2 * T), atol=1e-6)

    def test_round_trip(self):
        f = np.sin(3 * T) + T
        q = to_srvf(f).q
        assert_allclose(srvf_to_curve(q, start=f[0]), f, atol=2e-4)

    def test_decreasing_sign(self):
        assert np.all(to_srvf(-T).q < 0)

    def test_too_short(self):
        with pytest.raises(ParameterError):
            to_srvf([0.0, 1.0])

    def test_standardize(self):
        f = SampledFunction(T, 0.3 + 2.0 * T ** 2)
        s, c, e = standardize(f)
        assert (c, e) == pytest.approx((2.0, 0.3))
        assert_allclose(s.values, T ** 2, atol=1e-15)

    def test_standardize_flat(self):
        with pytest.raises(DegenerateVariogramError):
            standardize(SampledFunction(T, np.ones_like(T)))


class TestWarpAlgebra:
    def test_invert_and_compose(self):
        g = T ** 1.7
        assert_allclose(compose(g, invert_warp(g)), T, atol=2e-3)

    def test_mean_of_equal_warps(self):
        g = np.sin(np.pi * T / 2)
        assert_allclose(mean_warp([g, g, g]), g, atol=2e-3)

    def test_mean_of_inverse_pair_is_near_identity(self):
        g = T ** 2
        assert_allclose(mean_warp([g, invert_warp(g)]), T, atol=0.05)

    def test_action_preserves_norm(self):
        q = to_srvf(np.sin(3 * T)).q
        g = T ** 1.5
        assert_allclose(trapezoid(warp_srvf(q, g) ** 2, T), trapezoid(q ** 2, T), rtol=2e-2)


class TestDpAlign:
    @pytest.mark.parametrize("power", [0.5, 1.0, 2.0])
    def test_recovers_power_warp(self, power):
        f = np.sin(2.5 * T) + T
        gamma_true = T ** power
        target = np.interp(gamma_true, T, f)
        gamma, cost = dp_align(to_srvf(target), to_srvf(f))
        assert np.sqrt(np.mean((gamma - gamma_true) ** 2)) < 0.02
        assert gamma[0] == 0 and gamma[-1] == 1
        assert np.all(np.diff(gamma) >= 0)

    def test_identity_for_equal_curves(self):
        q = to_srvf(np.sin(2 * T) + T).q
        gamma, cost = dp_align(q, q)
        assert_allclose(gamma, T, atol=1e-12)
        assert cost == pytest.approx(0.0, abs=1e-12)

    def test_guards(self):
        with pytest.raises(ParameterError):
            dp_align(np.zeros(5), np.zeros(5))
        with pytest.raises(ParameterError):
            dp_align(np.zeros(16), np.zeros(17))
        with pytest.raises(ParameterError):
            dp_align(np.zeros(16), np.zeros(16), max_step=0)


class TestWarpingFunction:
    def test_identity_beyond_horizon(self):
        w = exponential_warp(1.5, 2.0)
        h = np.array([2.5, 10.0])
        assert_allclose(w(h), h)
        assert_allclose(w.inverse(w(np.linspace(0, 2, 11))), np.linspace(0, 2, 11), atol=1e-9)

    def test_validation(self):
        with pytest.raises(ParameterError):
            WarpingFunction(np.array([0, 1.0]), np.array([0, 0.9]), 1.0)
        with pytest.raises(ParameterError):
            WarpingFunction(np.array([0, 0.5, 1.0]), np.array([0, 0.6, 0.6]), 1.0)
        with pytest.raises(ParameterError):
            WarpingFunction(np.array([0, 1.0]), np.array([0, 1.0, 1.0]), 1.0)

    def test_families(self):
        assert exponential_warp(0.0, 1.0).is_identity()
        assert beta_cdf_warp(1.0, 1.0, 1.0).is_identity(1e-12)
        # Positive a bends the warp below the identity.
        w = exponential_warp(2.0, 1.0)
        assert np.all(w(np.linspace(0.05, 0.95, 19)) < np.linspace(0.05, 0.95, 19))


class TestSmoothing:
    def test_identity_stays_identity(self):
        h = np.linspace(0, 3, 300)
        w = smooth_and_extend(h, h, 3.0)
        assert w.is_identity(1e-12)

    def test_pins_and_bandwidth_default(self):
        h = np.linspace(0, 2, 200)
        w = smooth_and_extend(h, 2 * (h / 2) ** 1.5, 2.0)
        assert w.warped[0] == 0 and w.warped[-1] == 2.0
        assert w.bandwidth == pytest.approx(0.04)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.5))
    def test_noisy_input_gives_monotone_warp(self, seed, noise):
        rng = np.random.default_rng(seed)
        h = np.linspace(0, 1, 100)
        phi = h + noise * rng.normal(size=100)
        w = smooth_and_extend(h, phi, 1.0, bandwidth=0.01)
        assert np.all(np.diff(w.warped) > 0)

    def test_bad_arguments(self):
        h = np.linspace(0, 1, 10)
        with pytest.raises(ParameterError):
            smooth_and_extend(h, h, 1.0, bandwidth=0.0)
        with pytest.raises(ParameterError):
            smooth_and_extend(h, h, 0.0, bandwidth=0.1)


class TestRegisterSet:
    def test_equal_shapes_give_identity(self):
        m1 = VariogramModel(1.0, 0.3, 0.6)
        m2 = VariogramModel(2.5, 0.3, 0.6, nugget=0.4)
        fs = [sample_on_grid(m, 2.0, 128) for m in (m1, m2)]
        res = register_set(fs)
        assert res.converged
        for w in res.warps:
            assert np.max(np.abs(w.warped - w.knots)) < 1e-2
        assert_allclose(res.translations, [0.0, 0.4])
        assert_allclose(res.scalings, [fs[0].values[-1], fs[1].values[-1] - 0.4])

    def test_short_range_stretched(self):
        fs = [sample_on_grid(VariogramModel(1.0, a, 0.6), 2.0, 256) for a in (0.13, 0.28)]
        res = register_set(fs)
        mid = slice(50, 200)
        w0, w1 = res.warps
        assert np.all(w0.warped[mid] > w0.knots[mid])
        assert np.all(w1.warped[mid] < w1.knots[mid])

    def test_needs_two_curves(self):
        with pytest.raises(ParameterError):
            register_set([sample_on_grid(VariogramModel(1.0, 0.3, 0.5), 1.0, 64)])

    def test_grid_mismatch(self):
        m = VariogramModel(1.0, 0.3, 0.5)
        with pytest.raises(ParameterError):
            register_set([sample_on_grid(m, 1.0, 64), sample_on_grid(m, 1.2, 64)])
