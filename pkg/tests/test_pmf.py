import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plint.errors import AllZeroMass, EmptyVector, IntegerOverflow, InvalidRange, NegativeMass
from plint.pmf import (
    ProbInt,
    check_normalized,
    from_probs,
    mass_at,
    mass_stats,
    point,
    uniform,
)


class TestFromProbs:
    def test_basic(self):
        x = from_probs([0.2, 0.6, 0.15, 0.05], 0)
        assert x.offset == 0
        assert x.dim == 4
        assert math.exp(x.log_mass[1]) == pytest.approx(0.6, abs=0)

    def test_point_mass(self):
        x = from_probs([1.0], 7)
        assert (x.lo, x.hi) == (7, 7)
        assert mass_at(x, 7) == 1.0

    def test_zero_entry_becomes_neg_inf(self):
        x = from_probs([0.0, 0.5], 0)
        assert x.log_mass[0] == -np.inf
        assert x.log_mass[1] == pytest.approx(math.log(0.5))

    def test_no_renormalization(self):
        x = from_probs([0.45, 0.1, 0.25, 0.1], 0)
        assert x.total_mass() == pytest.approx(0.9, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(EmptyVector):
            from_probs([], 0)

    def test_negative_rejected(self):
        with pytest.raises(NegativeMass):
            from_probs([0.5, -0.1], 0)

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroMass):
            from_probs([0.0, 0.0], 0)


class TestUniform:
    def test_ten_entries(self):
        x = uniform(0, 9)
        assert x.dim == 10
        assert mass_at(x, 4) == pytest.approx(0.1)

    def test_degenerate(self):
        x = uniform(5, 5)
        assert mass_at(x, 5) == pytest.approx(1.0)

    def test_negative_range(self):
        x = uniform(-2, 1)
        assert x.offset == -2
        assert mass_at(x, -2) == pytest.approx(0.25)

    def test_inverted_rejected(self):
        with pytest.raises(InvalidRange):
            uniform(3, 2)

    def test_total_mass_tight(self):
        for lo, hi in [(0, 9), (-5, 17), (3, 3), (0, 999)]:
            assert abs(uniform(lo, hi).total_mass() - 1.0) <= 1e-12


class TestMassAt:
    def test_figure_value(self):
        x = from_probs([0.2, 0.6, 0.15, 0.05], 0)
        assert mass_at(x, 1) == pytest.approx(0.6)

    def test_out_of_support(self):
        assert mass_at(point(7), 3) == 0.0
        assert mass_at(uniform(0, 9), -1) == 0.0
        assert mass_at(uniform(0, 9), 10) == 0.0


class TestCheckNormalized:
    def test_uniform_is_normalized(self):
        assert check_normalized(uniform(0, 9), 1e-9)

    def test_subnormalized_fails(self):
        x = from_probs([0.45, 0.1, 0.25, 0.1], 0)
        assert not check_normalized(x, 1e-9)

    def test_two_halves(self):
        assert check_normalized(from_probs([0.5, 0.5], 0), 1e-9)

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            check_normalized(uniform(0, 1), 0.0)


def test_mass_stats():
    x = from_probs([0.1, 0.8, 0.0], -4)
    s = mass_stats(x)
    assert s.max_log == pytest.approx(math.log(0.8))
    assert s.total_mass == pytest.approx(0.9)


def test_immutability():
    x = uniform(0, 3)
    with pytest.raises(ValueError):
        x.log_mass[0] = 0.0
    probs = np.array([0.5, 0.5])
    y = from_probs(probs, 0)
    probs[0] = 99.0  # caller's array is not shared
    assert mass_at(y, 0) == pytest.approx(0.5)


def test_no_nan_or_posinf_allowed():
    with pytest.raises(ValueError):
        ProbInt(np.array([0.0, np.nan]), 0)
    with pytest.raises(ValueError):
        ProbInt(np.array([0.0, np.inf]), 0)


def test_offset_overflow():
    with pytest.raises(IntegerOverflow):
        ProbInt(np.zeros(1), 2**63)


@given(
    st.lists(st.floats(min_value=1e-12, max_value=1e6), min_size=1, max_size=40),
    st.integers(min_value=-1000, max_value=1000),
)
def test_round_trip_masses(probs, offset):
    x = from_probs(probs, offset)
    back = np.exp(x.log_mass)
    for p, q in zip(probs, back):
        assert q == pytest.approx(p, rel=1e-15)
    assert x.support()[0] == offset


@given(st.integers(-50, 50), st.integers(0, 30))
def test_mass_at_nonnegative_everywhere(lo, width):
    x = uniform(lo, lo + width)
    for v in range(lo - 3, lo + width + 4):
        assert mass_at(x, v) >= 0.0
        if not lo <= v <= lo + width:
            assert mass_at(x, v) == 0.0
