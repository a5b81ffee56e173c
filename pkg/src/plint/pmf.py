"""Bounded integer random variables stored as an offset plus a log-mass vector.

A ``ProbInt`` assigns a nonnegative mass to each integer in a contiguous
support ``{offset, ..., offset + dim - 1}``.  Masses live in the natural-log
domain; an entry of ``-inf`` encodes an exactly impossible outcome.  Vectors
are not required to sum to one: every engine operation is linear (or
bilinear) in the masses, and normalization is a checked property rather than
an enforced invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroMass, EmptyVector, IntegerOverflow, InvalidRange, NegativeMass

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def check_offset(value: int) -> int:
    """Reject offsets/bounds outside the signed 64-bit range."""
    if not (INT64_MIN <= value <= INT64_MAX):
        raise IntegerOverflow(f"support bound {value} exceeds signed 64-bit range")
    return int(value)


@dataclass(frozen=True, slots=True)
class ProbInt:
    """Immutable distribution of a bounded integer-valued random variable.

    ``log_mass[i]`` is the natural-log mass of outcome ``offset + i``.
    Entries are finite or ``-inf``, never NaN or ``+inf``.  Publicly
    constructed values carry at least one finite entry (positive total mass);
    internal intermediates produced by branch masking may be all ``-inf``.
    """

    log_mass: np.ndarray
    offset: int
    _checked: bool = field(default=True, repr=False, compare=False)
    max_log: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.log_mass, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise EmptyVector("log_mass must be a nonempty 1-D vector")
        # One reduction validates everything: NaN propagates into the max,
        # +inf dominates it, and an all-(-inf) vector has max == -inf.
        top = float(arr.max())
        if math.isnan(top) or top == math.inf:
            raise ValueError("log_mass entries must be finite or -inf")
        check_offset(self.offset)
        check_offset(self.offset + arr.size - 1)
        if self._checked and top == -math.inf:
            raise AllZeroMass("mass vector has no positive entry")
        if arr.flags.writeable:
            # Read-only arrays (produced by engine ops) are shared as-is;
            # anything writable gets defensively copied.
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "log_mass", arr)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "max_log", top)

    @property
    def dim(self) -> int:
        return self.log_mass.size

    @property
    def lo(self) -> int:
        """Smallest representable outcome."""
        return self.offset

    @property
    def hi(self) -> int:
        """Largest representable outcome."""
        return self.offset + self.dim - 1

    def support(self) -> np.ndarray:
        """All representable outcomes, including zero-mass ones."""
        return self.offset + np.arange(self.dim, dtype=np.int64)

    def masses(self) -> np.ndarray:
        """Linear-domain mass vector (fresh array)."""
        return np.exp(self.log_mass)

    def total_mass(self) -> float:
        return math.fsum(np.exp(self.log_mass))

    def __repr__(self) -> str:  # keep huge vectors out of tracebacks
        if self.dim <= 8:
            body = np.array2string(np.exp(self.log_mass), precision=6)
        else:
            body = f"<{self.dim} entries>"
        return f"ProbInt(offset={self.offset}, masses={body})"


@dataclass(frozen=True)
class MassStats:
    """Total linear-domain mass and the maximum finite log-mass entry."""

    total_mass: float
    max_log: float


def mass_stats(x: ProbInt) -> MassStats:
    if x.max_log == -math.inf:
        raise AllZeroMass("mass vector has no positive entry")
    return MassStats(total_mass=x.total_mass(), max_log=x.max_log)


def from_probs(probs, offset: int) -> ProbInt:
    """Build a ProbInt from linear-domain masses; zeros become -inf.

    Masses are stored verbatim, with no renormalization.
    """
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptyVector("probs must be a nonempty 1-D sequence")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mass = np.log(arr)
    log_mass.setflags(write=False)
    try:
        # The constructor's max-reduction doubles as validation: negative or
        # NaN masses surface as NaN logs, infinite masses as +inf logs,
        # all-zero masses as an all-(-inf) vector.
        return ProbInt(log_mass, offset)
    except ValueError:
        if (arr < 0).any() or np.isnan(arr).any():
            raise NegativeMass("probs must be nonnegative and NaN-free") from None
        raise ValueError("probs must be finite") from None
    except AllZeroMass:
        raise AllZeroMass("probs must contain at least one positive entry") from None


def uniform(lo: int, hi: int) -> ProbInt:
    """Uniform distribution over the integers lo..hi inclusive."""
    if lo > hi:
        raise InvalidRange(f"uniform bounds inverted: {lo} > {hi}")
    check_offset(lo)
    check_offset(hi)
    dim = hi - lo + 1
    log_mass = np.full(dim, -math.log(dim))
    log_mass.setflags(write=False)
    return ProbInt(log_mass, lo)


def point(v: int) -> ProbInt:
    """Point mass at v."""
    return ProbInt(np.zeros(1), v)


def mass_at(x: ProbInt, v: int) -> float:
    """Linear-domain mass of outcome v; zero outside the support."""
    i = v - x.offset
    if 0 <= i < x.dim:
        return float(np.exp(x.log_mass[i]))
    return 0.0


def check_normalized(x: ProbInt, tol: float) -> bool:
    """True iff the total mass is within tol of one."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return abs(x.total_mass() - 1.0) <= tol


def unchecked(log_mass: np.ndarray, offset: int) -> ProbInt:
    """Internal constructor that tolerates all-zero mass vectors.

    Branch masking legitimately produces zero-mass intermediates; they stay
    inside the engine and never escape through public constructors.
    """
    return ProbInt(log_mass, offset, _checked=False)
