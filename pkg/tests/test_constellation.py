import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmmse_isic.constellation import (
    SUPPORTED_ORDERS,
    bits_from_hard_indices,
    build_constellation,
    indices_from_bits,
    nearest_index,
    parse_modulation,
    posterior_from_exponents,
    soft_statistics,
    symbols_from_bits,
)

# Posterior, soft decision and variance at x_hat = 0.3 + 0.1j, mu = 0.8 for
# 4-QAM, evaluated once at 40 digits with mpmath and frozen here.
FROZEN_P = [0.0027704561340217900146, 0.01139557974266661278,
            0.19279986135902130479, 0.79303410276429029241]
FROZEN_XBAR = 0.68707298112467094767 + 0.43052858579027382193j
FROZEN_V = 0.3425758554258843934

finite = st.floats(-4, 4, allow_nan=False)


class TestBuild:
    @pytest.mark.parametrize("order", SUPPORTED_ORDERS)
    def test_unit_energy_and_distinct(self, order):
        c = build_constellation(order)
        assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
        assert len(np.unique(np.round(c.points, 12))) == order

    def test_qpsk_points(self):
        pts = set(np.round(build_constellation(4).points * np.sqrt(2), 12))
        assert pts == {1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j}

    def test_16qam_corner(self):
        c = build_constellation(16)
        assert np.max(np.abs(c.points)) == pytest.approx(3 * np.sqrt(2) / np.sqrt(10), abs=1e-15)
        assert c.energy_scale == pytest.approx(1 / np.sqrt(10))

    def test_64qam_scale(self):
        assert build_constellation(64).energy_scale == pytest.approx(1 / np.sqrt(42))

    @pytest.mark.parametrize("order", SUPPORTED_ORDERS)
    def test_gray_on_each_axis(self, order):
        c = build_constellation(order)
        for axis in (np.real, np.imag):
            other = np.imag if axis is np.real else np.real
            for lane in np.unique(np.round(other(c.points), 12)):
                idx = np.flatnonzero(np.isclose(other(c.points), lane))
                idx = idx[np.argsort(axis(c.points[idx]))]
                for a, b in zip(idx[:-1], idx[1:]):
                    assert np.sum(c.bit_labels[a] != c.bit_labels[b]) == 1

    @pytest.mark.parametrize("order", [2, 8, 32, 256])
    def test_unsupported(self, order):
        with pytest.raises(ValueError, match="supported orders"):
            build_constellation(order)

    @pytest.mark.parametrize("text,order", [("4qam", 4), ("16-QAM", 16), ("qpsk", 4), ("64", 64)])
    def test_parse(self, text, order):
        assert parse_modulation(text).order == order


class TestBits:
    def test_lookup(self):
        c = build_constellation(4)
        x = symbols_from_bits([0, 0], c)
        assert list(c.bit_labels[0]) == [0, 0]
        assert x[0] == c.points[0]

    @pytest.mark.parametrize("order", SUPPORTED_ORDERS)
    def test_round_trip(self, order, rng):
        c = build_constellation(order)
        n = 1024 - 1024 % c.bits_per_symbol
        bits = rng.integers(0, 2, n)
        np.testing.assert_array_equal(bits_from_hard_indices(indices_from_bits(bits, c), c), bits)
        x = symbols_from_bits(bits, c)
        np.testing.assert_array_equal(c.points[indices_from_bits(bits, c)], x)

    def test_adjacent_symbol_costs_one_bit(self):
        # the nearest neighbour along an axis is one Gray step away
        c = build_constellation(16)
        for k, p in enumerate(c.points):
            d = np.abs(c.points - p)
            d[k] = np.inf
            for j in np.flatnonzero(np.isclose(d, d.min())):
                got = bits_from_hard_indices(np.array([j]), c)
                ref = bits_from_hard_indices(np.array([k]), c)
                assert np.sum(got != ref) == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            symbols_from_bits([0, 1, 1], build_constellation(16))

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            bits_from_hard_indices(np.array([4]), build_constellation(4))


class TestSoftStatistics:
    def test_symmetric_point(self):
        s = soft_statistics(0.0, 0.5, build_constellation(4))
        np.testing.assert_allclose(s.posterior, 0.25, atol=1e-15)
        assert abs(s.soft_decision) < 1e-15
        assert s.residual_variance == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("order", SUPPORTED_ORDERS)
    def test_zero_variance_limit(self, order):
        c = build_constellation(order)
        x0 = c.points[order // 3]
        s = soft_statistics(x0 * (1 - 1e-13), 1 - 1e-13, c)
        assert s.hard_index == order // 3
        assert abs(s.soft_decision - x0) < 1e-9
        assert s.residual_variance < 1e-9

    def test_frozen_oracle(self):
        s = soft_statistics(0.3 + 0.1j, 0.8, build_constellation(4))
        np.testing.assert_allclose(s.posterior, FROZEN_P, rtol=1e-12)
        assert abs(s.soft_decision - FROZEN_XBAR) <= 1e-12 * abs(FROZEN_XBAR)
        assert s.residual_variance == pytest.approx(FROZEN_V, rel=1e-12)
        assert s.hard_index == 3

    def test_batched_matches_scalar(self, rng):
        c = build_constellation(16)
        xh = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        mu = rng.uniform(0, 1, (3, 5))
        s = soft_statistics(xh, mu, c)
        one = soft_statistics(xh[2, 4], mu[2, 4], c)
        np.testing.assert_allclose(s.posterior[2, 4], one.posterior, rtol=1e-14)
        assert s.residual_variance[2, 4] == pytest.approx(one.residual_variance, rel=1e-14)

    def test_mu_outside_unit_interval_is_clamped(self):
        c = build_constellation(4)
        for mu in (-0.5, 0.0, 1.0, 3.0):
            s = soft_statistics(0.2 - 0.4j, mu, c)
            assert np.all(np.isfinite(s.posterior))
            assert abs(s.posterior.sum() - 1) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(re=finite, im=finite, mu=st.floats(-0.5, 1.5), order=st.sampled_from(SUPPORTED_ORDERS))
    def test_properties(self, re, im, mu, order):
        c = build_constellation(order)
        s = soft_statistics(complex(re, im), mu, c)
        P = s.posterior
        assert np.all(P >= 0)
        assert abs(P.sum() - 1) <= 1e-12
        assert s.hard_index == np.argmax(P)
        second = np.sum(P * np.abs(c.points) ** 2)
        assert -1e-15 <= s.residual_variance <= second + 1e-12
        assert s.residual_variance <= 1 + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(re=finite, im=finite, mu=st.floats(1e-3, 1 - 1e-3), order=st.sampled_from(SUPPORTED_ORDERS))
    def test_argmax_is_nearest_scaled_point(self, re, im, mu, order):
        c = build_constellation(order)
        s = soft_statistics(complex(re, im), mu, c)
        near = nearest_index(complex(re, im), mu, c)
        if near != s.hard_index:
            # only acceptable on an exact (or rounding-level) tie
            d = np.abs(complex(re, im) - mu * c.points) ** 2
            assert d[s.hard_index] - d[near] <= 1e-12 * max(d.max(), 1)

    def test_ties_go_to_lowest_index(self):
        c = build_constellation(4)
        s = soft_statistics(0.0, 0.5, c)
        assert s.hard_index == 0
        assert nearest_index(0.0, 0.5, c) == 0

    @settings(max_examples=100, deadline=None)
    @given(e=st.lists(st.floats(-50, 50), min_size=4, max_size=4), k=st.integers(-20, 20))
    def test_power_of_two_scaling_is_exact(self, e, k):
        # multiplying every psi by 2**k adds k*ln 2 to every exponent; the
        # shift removes it exactly when the exponents stay representable
        e = np.array(e)
        shift = k * np.log(2.0)
        a = posterior_from_exponents(e)
        b = posterior_from_exponents(e + shift)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
        assert np.argmax(a) == np.argmax(b)

    def test_integer_shift_is_bit_exact(self):
        e = np.array([-3.0, -1.0, 0.0, -7.5])
        np.testing.assert_array_equal(posterior_from_exponents(e), posterior_from_exponents(e + 8.0))

    def test_no_underflow_at_high_snr(self):
        c = build_constellation(64)
        s = soft_statistics(c.points[10] * 0.999999, 0.999999, c)
        assert np.all(np.isfinite(s.posterior))
        assert s.hard_index == 10
