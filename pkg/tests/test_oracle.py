import math

import numpy as np
import pytest

from plint import lang, oracle
from plint.errors import StateSpaceTooLarge
from plint.pmf import from_probs, uniform
from plint.programs import luhn_source


class TestEnumerateQuery:
    def test_figure_program(self):
        src = (
            "pint X1 ~ pmf{0:0.2, 1:0.6, 2:0.15, 3:0.05};"
            "pint X2 ~ pmf{0:0.45, 1:0.1, 2:0.25, 3:0.1};"
            "query pmf[X1 + X2];"
        )
        p = lang.parse(src)
        offset, masses = oracle.enumerate_query(p, p.queries[0])
        assert offset == 0
        want = [0.09, 0.29, 0.1775, 0.2075, 0.1025, 0.0275, 0.005]
        assert np.max(np.abs(np.array(masses) - want)) < 1e-15

    def test_uniform_expectation(self):
        p = lang.parse("pint X ~ uniform(0,9); query E[X];")
        assert oracle.enumerate_query(p, p.queries[0]) == pytest.approx(4.5)

    def test_valid_identifier_is_certain(self):
        digits = [7, 9, 9, 2, 7, 3, 9, 8, 7, 1, 3]
        decls = "".join(
            f"pint D{i} ~ point({d});" for i, d in enumerate(digits)
        )
        # splice the deterministic digits into the generated Luhn program
        body = luhn_source(len(digits)).split("\n")
        body = [line for line in body if not line.startswith("pint")]
        p = lang.parse(decls + "\n".join(body))
        assert oracle.enumerate_query(p, p.queries[0]) == pytest.approx(1.0, abs=0)

    def test_prob_query(self):
        p = lang.parse("pint X ~ uniform(0,9); query Pr[X mod 3 == 0];")
        assert oracle.enumerate_query(p, p.queries[0]) == pytest.approx(0.4)

    def test_cap_enforced(self):
        p = lang.parse(
            "pint A ~ uniform(0,99); pint B ~ uniform(0,99); query E[A + B];"
        )
        with pytest.raises(StateSpaceTooLarge):
            oracle.enumerate_query(p, p.queries[0], cap=1000)

    def test_mass_sums_to_leaf_total_product(self):
        src = (
            "pint A ~ pmf{0:0.3, 1:0.3};"  # total 0.6
            "pint B ~ pmf{0:0.2, 2:0.3};"  # total 0.5
            "query pmf[A + B];"
        )
        p = lang.parse(src)
        _, masses = oracle.enumerate_query(p, p.queries[0])
        assert math.fsum(masses) == pytest.approx(0.3, rel=1e-9)

    def test_deterministic_across_runs(self):
        p = lang.parse(luhn_source(3))
        a = oracle.enumerate_query(p, p.queries[0])
        b = oracle.enumerate_query(p, p.queries[0])
        assert a == b


class TestDeterministicCompile:
    def test_floor_div_and_math_mod(self):
        p = lang.parse("pint X ~ uniform(-7,-1); query E[X // 2];")
        fn = oracle.compile_deterministic(p, p.queries[0].expr)
        for v in range(-7, 0):
            assert fn(v) == v // 2
        p2 = lang.parse("pint X ~ uniform(-7,-1); query E[X mod 3];")
        fn2 = oracle.compile_deterministic(p2, p2.queries[0].expr)
        for v in range(-7, 0):
            assert fn2(v) == v % 3

    def test_branch_condition(self):
        p = lang.parse(
            "pint X ~ uniform(0,9);"
            "let V = if (X < 5) then 2*X else 2*X - 9;"
            "query E[V];"
        )
        fn = oracle.compile_deterministic(p, p.queries[0].expr)
        for v in range(10):
            assert fn(v) == (2 * v if v < 5 else 2 * v - 9)

    def test_bindings_expand_in_order(self):
        p = lang.parse(
            "pint X ~ point(5); let A = X + 1; let B = A * 2; query E[B mod 4];"
        )
        fn = oracle.compile_deterministic(p, p.queries[0].expr)
        assert fn(5) == ((5 + 1) * 2) % 4


class TestJointPushforward:
    def test_two_dice_sum(self):
        d = uniform(1, 6)
        offset, masses = oracle.joint_pushforward([d, d], lambda a, b: a + b)
        assert offset == 2
        assert masses[5] == pytest.approx(6 / 36)  # seven

    def test_zero_weight_assignments_skipped(self):
        x = from_probs([0.0, 1.0], 0)
        offset, masses = oracle.joint_pushforward([x], lambda v: v * 100)
        assert offset == 100
        assert list(masses) == [1.0]

    def test_matches_engine_convolution(self):
        rng = np.random.default_rng(2)
        from plint.ops import add_rv

        a = from_probs(rng.random(17) + 1e-12, -4)
        b = from_probs(rng.random(9) + 1e-12, 2)
        offset, masses = oracle.joint_pushforward([a, b], lambda u, v: u + v)
        s = add_rv(a, b)
        assert offset == s.offset
        assert np.max(np.abs(masses - s.masses())) < 1e-12
