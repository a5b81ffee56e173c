"""Ready-made engine programs: Luhn checksums, digit sums, sudoku constraints.

These are the composite workloads used by the benchmark CLI and the test
suite; they exercise branching, modular arithmetic and long chains of
additions on top of the core operations.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .autodiff import LeafParam, Tape
from .infer import BranchSpec, Condition, branch, expectation, prob_cmp
from .ops import LinearOpChain, add_rv, div_const, mod_const, mul_const, scale, shift
from .pmf import ProbInt, from_probs, point

# Positions whose index parity matches the identifier length get the
# doubled-digit transform 2d (d < 5) / 2d - 9 (d >= 5); the identifier is
# valid when the running mod-10 sum ends at 0.
LUHN_TRANSFORM = BranchSpec(
    Condition(LinearOpChain((shift(-5),)), "<"),
    LinearOpChain((scale(2),)),
    LinearOpChain((scale(2), shift(-9))),
)


def luhn_check_dist(digits: Sequence[ProbInt]) -> ProbInt:
    """Distribution of the Luhn check value of independent digit variables."""
    n = len(digits)
    check = point(0)
    for i, digit in enumerate(digits):
        term = branch(digit, LUHN_TRANSFORM) if i % 2 == n % 2 else digit
        check = mod_const(add_rv(check, term), 10)
    return check


def luhn_valid_prob(digits: Sequence[ProbInt]) -> float:
    return prob_cmp(luhn_check_dist(digits), "==", 0)


def luhn_source(n: int) -> str:
    """DSL source of the probabilistic Luhn check over n uniform digits."""
    lines = [f"pint D{i} ~ uniform(0, 9);" for i in range(n)]
    prev = None
    for i in range(n):
        if i % 2 == n % 2:
            lines.append(f"let T{i} = if (D{i} < 5) then 2*D{i} else 2*D{i} - 9;")
            term = f"T{i}"
        else:
            term = f"D{i}"
        name = "check" if i == n - 1 else f"C{i}"
        if prev is None:
            lines.append(f"let {name} = {term} mod 10;")
        else:
            lines.append(f"let {name} = ({prev} + {term}) mod 10;")
        prev = name
    lines.append(f"query Pr[{prev} == 0];")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# multi-digit addition encodings

def digit_sum_direct(digits1: Sequence[ProbInt], digits2: Sequence[ProbInt]) -> ProbInt:
    """Sum of two multi-digit numbers built as full base-10 recombinations."""

    def number(digits):
        acc = None
        for i, d in enumerate(digits):
            term = mul_const(d, 10**i)
            acc = term if acc is None else add_rv(acc, term)
        return acc

    return add_rv(number(digits1), number(digits2))


def digit_sum_carry(
    digits1: Sequence[ProbInt], digits2: Sequence[ProbInt]
) -> tuple[list[ProbInt], ProbInt]:
    """Positionwise sum with a running carry.

    Returns the per-position digit distributions plus the final carry.  The
    digit marginals are exact but mutually correlated, so recombining them as
    if independent does not reproduce the joint sum distribution; expectations
    still agree with the direct encoding by linearity.
    """
    carry = point(0)
    result = []
    for d1, d2 in zip(digits1, digits2):
        total = add_rv(add_rv(d1, d2), carry)
        result.append(mod_const(total, 10))
        carry = div_const(total, 10)
    return result, carry


def carry_sum_expectation(digits1, digits2) -> float:
    """E[number1 + number2] recombined from the carry encoding's marginals."""
    result, carry = digit_sum_carry(digits1, digits2)
    n = len(result)
    return math.fsum(
        [expectation(d) * 10**i for i, d in enumerate(result)]
        + [expectation(carry) * 10**n]
    )


def build_sum_tape_carry(leaves: list[LeafParam], digits_per_number: int):
    """Tape version of the carry encoding over softmax digit leaves."""
    tape = Tape()
    n = digits_per_number
    digit_nodes = [tape.leaf(p) for p in leaves]
    carry = None
    result = []
    for i in range(n):
        total = tape.add_rv(digit_nodes[i], digit_nodes[n + i])
        if carry is not None:
            total = tape.add_rv(total, carry)
        result.append(tape.mod_const(total, 10))
        carry = tape.div_const(total, 10)
    return tape, result, carry


# ---------------------------------------------------------------------------
# sudoku constraint probabilities

def bernoulli(p: float) -> ProbInt:
    return from_probs([max(1.0 - p, 0.0), p] if p < 1.0 else [0.0, 1.0], 0)


def exactly_one_prob(hit_probs: Sequence[float]) -> float:
    """Probability that exactly one of the independent events occurs."""
    acc = None
    for p in hit_probs:
        b = bernoulli(float(p))
        acc = b if acc is None else add_rv(acc, b)
    return prob_cmp(acc, "==", 1)


def sudoku_units(grid: int) -> list[list[tuple[int, int]]]:
    """Cell groups that must each contain every value exactly once."""
    units = [[(i, j) for j in range(grid)] for i in range(grid)]
    units += [[(i, j) for i in range(grid)] for j in range(grid)]
    if grid == 9:
        for bi in range(3):
            for bj in range(3):
                units.append(
                    [(3 * bi + i, 3 * bj + j) for i in range(3) for j in range(3)]
                )
    return units


def sudoku_constraint_probs(cells: np.ndarray) -> list[list[float]]:
    """Per unit, per value: probability the value appears exactly once.

    cells has shape (G, G, G): cells[i, j, k] is the probability that cell
    (i, j) holds value k.  Constraints are treated as independent of one
    another, so the product of all entries is an approximation of the
    probability that the whole grid is valid, not the exact value.
    """
    grid = cells.shape[0]
    out = []
    for unit in sudoku_units(grid):
        out.append(
            [
                exactly_one_prob([cells[i, j, k] for i, j in unit])
                for k in range(grid)
            ]
        )
    return out


def sudoku_total_logprob(cells: np.ndarray) -> float:
    total = 0.0
    for unit_probs in sudoku_constraint_probs(cells):
        for p in unit_probs:
            total += math.log(p) if p > 0.0 else -math.inf
    return total


def point_grid(values: np.ndarray) -> np.ndarray:
    """Deterministic grid: cells[i,j] is a point mass at values[i,j]."""
    grid = values.shape[0]
    cells = np.zeros((grid, grid, grid))
    for i in range(grid):
        for j in range(grid):
            cells[i, j, int(values[i, j])] = 1.0
    return cells


def random_cells(grid: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-support categorical distribution per cell."""
    cells = np.exp(rng.standard_normal((grid, grid, grid)))
    return cells / cells.sum(axis=2, keepdims=True)


def sudoku_constraint_oracle(cells: np.ndarray, unit, value: int) -> float:
    """Enumeration reference for one exactly-once constraint."""
    from .oracle import joint_pushforward

    pints = [from_probs(cells[i, j], 0) for i, j in unit]

    def count(*vals) -> int:
        return sum(1 for v in vals if v == value)

    offset, masses = joint_pushforward(pints, count)
    idx = 1 - offset
    return float(masses[idx]) if 0 <= idx < masses.size else 0.0
