import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plint.errors import AllZeroMass, NonPowerOfTwoLength, NumericalBlowup
from plint.fftconv import (
    CLAMP_REL_THRESHOLD,
    clamp_negatives,
    fft,
    log_conv_exp,
    log_naive_conv,
    naive_conv,
    next_pow2,
)

FIG_LEFT = np.array([0.2, 0.6, 0.15, 0.05])
FIG_MID = np.array([0.45, 0.1, 0.25, 0.1])
FIG_CONV = np.array([0.09, 0.29, 0.1775, 0.2075, 0.1025, 0.0275, 0.005])


class TestFft:
    def test_delta_to_constant(self):
        out = fft(np.array([1.0, 0, 0, 0]))
        assert np.allclose(out, np.ones(4))

    def test_constant_to_scaled_delta(self):
        out = fft(np.array([1.0, 1, 1, 1]))
        assert np.allclose(out, [4, 0, 0, 0])

    def test_inverse_roundtrip(self):
        rng = np.random.default_rng(0)
        buf = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        back = fft(fft(buf), inverse=True)
        assert np.max(np.abs(back - buf)) < 1e-12

    @pytest.mark.parametrize("n", [3, 5, 6, 7, 12, 1000])
    def test_non_power_of_two_rejected(self, n):
        with pytest.raises(NonPowerOfTwoLength):
            fft(np.zeros(n))

    def test_length_one(self):
        assert fft(np.array([3.0 + 0j]))[0] == 3.0


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 4, 5, 100)] == [1, 2, 4, 4, 8, 128]


class TestLogConvExp:
    def test_two_coins(self):
        out = np.exp(log_conv_exp(np.log([0.5, 0.5]), np.log([0.5, 0.5])))
        assert np.allclose(out, [0.25, 0.5, 0.25], atol=1e-15)

    def test_figure_inputs(self):
        with np.errstate(divide="ignore"):
            out = np.exp(log_conv_exp(np.log(FIG_LEFT), np.log(FIG_MID)))
        assert np.max(np.abs(out - FIG_CONV)) < 1e-12
        # unnormalized input: total mass multiplies
        assert math.fsum(out) == pytest.approx(0.9, abs=1e-12)

    def test_point_mass_identity(self):
        b = np.log([0.3, 0.2, 0.5])
        out = log_conv_exp(np.array([0.0]), b)
        assert np.array_equal(out, b)  # exact bypass, no FFT roundoff

    def test_single_finite_entry_bypass(self):
        a = np.array([-np.inf, math.log(0.5), -np.inf])
        b = np.log([0.4, 0.6])
        out = np.exp(log_conv_exp(a, b))
        assert np.allclose(out, [0, 0.2, 0.3, 0], atol=0)

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroMass):
            log_conv_exp(np.array([-np.inf, -np.inf]), np.log([0.5, 0.5]))

    def test_empty_rejected(self):
        with pytest.raises(AllZeroMass):
            log_conv_exp(np.array([]), np.array([0.0]))


class TestNaiveConv:
    def test_figure_inputs(self):
        out = naive_conv(FIG_LEFT, FIG_MID)
        assert np.max(np.abs(out - FIG_CONV)) < 1e-15

    def test_two_coins(self):
        assert np.allclose(naive_conv([0.5, 0.5], [0.5, 0.5]), [0.25, 0.5, 0.25])

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroMass):
            naive_conv([0.0, 0.0], [0.5])

    def test_agrees_with_fft_within_1e10(self):
        with np.errstate(divide="ignore"):
            fft_out = np.exp(log_conv_exp(np.log(FIG_LEFT), np.log(FIG_MID)))
        assert np.max(np.abs(fft_out - naive_conv(FIG_LEFT, FIG_MID))) < 1e-10


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(6))
    def test_random_large_dims(self, seed):
        rng = np.random.default_rng(seed)
        da = int(rng.integers(1, 4097))
        db = int(rng.integers(1, 4097))
        a = rng.random(da) + 1e-9
        b = rng.random(db) + 1e-9
        via_fft = np.exp(log_conv_exp(np.log(a), np.log(b)))
        via_naive = naive_conv(a, b)
        bound = 1e-9 * float(a.sum() * b.sum())
        assert np.max(np.abs(via_fft - via_naive)) <= bound

    def test_mass_product(self):
        rng = np.random.default_rng(3)
        a = rng.random(513)
        b = rng.random(901)
        out = np.exp(log_conv_exp(np.log(a), np.log(b)))
        expected = float(a.sum()) * float(b.sum())
        assert math.fsum(out) == pytest.approx(expected, rel=1e-9)


@given(st.integers(0, 10**6), st.floats(min_value=-40, max_value=40))
@settings(max_examples=40, deadline=None)
def test_scale_linearity(seed, c):
    rng = np.random.default_rng(seed)
    a = np.log(rng.random(int(rng.integers(2, 40))) + 1e-9)
    b = np.log(rng.random(int(rng.integers(2, 40))) + 1e-9)
    base = log_conv_exp(a, b)
    shifted = log_conv_exp(a + c, b)
    assert np.max(np.abs(shifted - (base + c))) < 1e-10


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_commutativity_associativity(seed):
    rng = np.random.default_rng(seed)
    vecs = [np.log(rng.random(int(rng.integers(1, 257))) + 1e-9) for _ in range(3)]
    a, b, c = vecs
    ab = log_conv_exp(a, b)
    ba = log_conv_exp(b, a)
    assert np.max(np.abs(np.exp(ab) - np.exp(ba))) < 1e-9
    left = np.exp(log_conv_exp(ab, c))
    right = np.exp(log_conv_exp(a, log_conv_exp(b, c)))
    assert np.max(np.abs(left - right)) < 1e-9


class TestUnderflowRobustness:
    def test_log_domain_survives_tiny_masses(self):
        lam = np.full(64, math.log(1e-300))
        out = log_conv_exp(lam, lam)
        assert np.isfinite(out).all()
        assert out[0] == pytest.approx(2 * math.log(1e-300), rel=1e-12)

    def test_linear_domain_underflows_to_zero(self):
        lam = np.full(64, math.log(1e-300))
        out = log_naive_conv(lam, lam)
        assert (out == -np.inf).all()  # products underflow in linear domain

    def test_fft_path_also_survives(self):
        # above the direct-convolution cutoff, so the stabilized FFT runs
        lam = np.full(300, math.log(1e-300))
        out = log_conv_exp(lam, lam)
        assert np.isfinite(out).all()


class TestClampDiscipline:
    def test_small_negatives_clamped_to_zero(self):
        arr = np.array([1.0, -1e-14, 0.5])
        out = clamp_negatives(arr, scale=1.0)
        assert out[1] == 0.0

    def test_large_negative_raises(self):
        arr = np.array([1.0, -1e-6, 0.5])
        with pytest.raises(NumericalBlowup):
            clamp_negatives(arr, scale=1.0)

    def test_threshold_scales_with_mass(self):
        arr = np.array([-0.5e-10 * 4.0])
        clamp_negatives(arr, scale=4.0)  # just under threshold
        assert arr[0] == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_fft_negatives_stay_below_threshold(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.random(2000) + 1e-12
        b = rng.random(3000) + 1e-12
        out = np.exp(log_conv_exp(np.log(a), np.log(b)))  # raises if violated
        bound = CLAMP_REL_THRESHOLD * float(a.sum() * b.sum())
        assert np.min(out) >= 0.0
        assert bound > 0


def test_concurrent_use_is_consistent():
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(11)
    a = np.log(rng.random(700) + 1e-9)
    b = np.log(rng.random(900) + 1e-9)
    expected = log_conv_exp(a, b)
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda _: log_conv_exp(a, b), range(16)))
    for out in results:
        assert np.array_equal(out, expected)
