"""Exact inference primitives: expectations, comparison probabilities, branching.

Branching never divides by the condition probability.  The input mass vector
is split by the condition indicator, each part is pushed through its branch
chain, and the two results are added over the union support.  For normalized
inputs this is algebraically the textbook mixture
``p(out|true) P(true) + p(out|false) P(false)`` with the weights absorbed into
the unnormalized parts, so a zero-probability branch is simply an absent term
rather than a 0/0.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroMass
from .ops import LinearOpChain, apply_chain
from .pmf import ProbInt, unchecked

COMPARATORS = {
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class Condition:
    """Predicate c(v) = (chain(v) cmp 0), total and deterministic on integers."""

    chain: LinearOpChain
    comparator: str

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")

    def holds(self, v: int) -> bool:
        return COMPARATORS[self.comparator](self.chain.apply_int(v), 0)


@dataclass(frozen=True)
class BranchSpec:
    """If-then-else over one random variable: condition plus both branch maps."""

    condition: Condition
    true_chain: LinearOpChain = field(default_factory=LinearOpChain)
    false_chain: LinearOpChain = field(default_factory=LinearOpChain)


def _require_mass(x: ProbInt) -> None:
    if x.max_log == -math.inf:
        raise AllZeroMass("operation requires positive total mass")


def expectation(x: ProbInt) -> float:
    """Sum of outcome * mass over the support, compensated."""
    _require_mass(x)
    terms = x.support().astype(np.float64) * np.exp(x.log_mass)
    return math.fsum(terms)


def prob_cmp(x: ProbInt, comparator: str, rhs: int) -> float:
    """Mass of the outcome set {v : v cmp rhs}.

    Equality is a single index lookup; every other comparator is a
    compensated sum over exactly its satisfying slice.  (Summing the set
    directly instead of complementing the total keeps entries outside the
    set bit-exactly out of the result, so they can be perturbed without
    moving it.)  On normalized input the results behave like probabilities:
    P(<) + P(=) + P(>) = 1 and P(!=) = 1 - P(=).
    """
    if comparator not in COMPARATORS:
        raise ValueError(f"unknown comparator {comparator!r}")
    _require_mass(x)
    i = rhs - x.offset
    if comparator == "==":  # single-index lookup, no full exp
        return math.exp(x.log_mass[i]) if 0 <= i < x.dim else 0.0
    masses = np.exp(x.log_mass)

    def clip(i: int) -> int:
        return min(max(i, 0), x.dim)
    if comparator == "<":
        return math.fsum(masses[: clip(i)])
    if comparator == "<=":
        return math.fsum(masses[: clip(i + 1)])
    if comparator == ">":
        return math.fsum(masses[clip(i + 1) :])
    if comparator == ">=":
        return math.fsum(masses[clip(i) :])
    if 0 <= i < x.dim:  # !=
        return math.fsum(masses[:i]) + math.fsum(masses[i + 1 :])
    return math.fsum(masses)


def condition_mask(x: ProbInt, cond: Condition) -> np.ndarray:
    """Boolean vector: does the condition hold at each support point."""
    return np.fromiter(
        (cond.holds(v) for v in range(x.lo, x.hi + 1)), dtype=bool, count=x.dim
    )


def mask_split(x: ProbInt, mask: np.ndarray) -> tuple[ProbInt | None, ProbInt | None]:
    """Split the mass vector by a support mask; empty sides become None.

    A side is None only when no support point satisfies it; a side whose
    selected masses are all zero is kept (it is a valid zero-mass vector and
    gradients may still flow through it).
    """
    if mask.all():
        return x, None
    if not mask.any():
        return None, x
    kept = np.where(mask, x.log_mass, -np.inf)
    dropped = np.where(mask, -np.inf, x.log_mass)
    return unchecked(kept, x.offset), unchecked(dropped, x.offset)


def superpose(a: ProbInt, b: ProbInt) -> ProbInt:
    """Mass-wise sum of two ProbInts over the union of their supports."""
    lo = min(a.lo, b.lo)
    hi = max(a.hi, b.hi)
    out = np.full(hi - lo + 1, -np.inf)
    out[a.lo - lo : a.lo - lo + a.dim] = a.log_mass
    sl = slice(b.lo - lo, b.lo - lo + b.dim)
    out[sl] = np.logaddexp(out[sl], b.log_mass)
    return unchecked(out, lo)


def branch(x: ProbInt, spec: BranchSpec) -> ProbInt:
    """Distribution of ``if c(X) then g_true(X) else g_false(X)``.

    Total output mass equals total input mass; a branch whose condition set
    is empty contributes nothing and causes no error.
    """
    _require_mass(x)
    mask = condition_mask(x, spec.condition)
    x_true, x_false = mask_split(x, mask)
    if x_false is None:
        return apply_chain(x, spec.true_chain)
    if x_true is None:
        return apply_chain(x, spec.false_chain)
    pushed_true = apply_chain(x_true, spec.true_chain)
    pushed_false = apply_chain(x_false, spec.false_chain)
    return superpose(pushed_true, pushed_false)
