"""Closed arithmetic on ProbInts: X1+X2, X+k, -X, k*X, X//k, X mod k.

Each operation is linear in the input masses.  Shifts, negations and
constant multiplications permute or embed the mass vector exactly;
division/modulo accumulate groups of entries; random-variable addition
convolves.  ``LinearOpChain`` packages compositions of the unary operations
as a deterministic integer map applicable both to plain integers and,
through pushforward, to ProbInts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fftconv
from .errors import AllZeroMass, DimensionOverflow, InvalidDivisor
from .pmf import ProbInt, check_offset, unchecked

DEFAULT_MAX_DIM = 1 << 26

_ATOM_KINDS = ("shift", "negate", "scale", "idiv", "imod")


def shift(k: int) -> tuple:
    return ("shift", int(k))


def negate_op() -> tuple:
    return ("negate", 0)


def scale(k: int) -> tuple:
    return ("scale", int(k))


def idiv(k: int) -> tuple:
    return ("idiv", int(k))


def imod(k: int) -> tuple:
    return ("imod", int(k))


def apply_atom_int(kind: str, k: int, v: int) -> int:
    """One atomic op on a plain integer.

    Shared by chain application and the enumeration oracle so both sides use
    the same integer semantics: // is floor division, mod is mathematical
    (result in 0..k-1).
    """
    if kind == "shift":
        return v + k
    if kind == "negate":
        return -v
    if kind == "scale":
        return v * k
    if kind == "idiv":
        return v // k
    if kind == "imod":
        return v % k
    raise ValueError(f"unknown atomic op {kind!r}")


@dataclass(frozen=True)
class LinearOpChain:
    """Composition of atomic integer ops, applied left to right."""

    atoms: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((kind, int(k)) for kind, k in self.atoms))
        for kind, k in self.atoms:
            if kind not in _ATOM_KINDS:
                raise ValueError(f"unknown atomic op {kind!r}")
            if kind in ("idiv", "imod") and k < 1:
                raise InvalidDivisor(f"{kind} constant must be >= 1, got {k}")

    def apply_int(self, v: int) -> int:
        for kind, k in self.atoms:
            v = apply_atom_int(kind, k, v)
        return v

    def __len__(self) -> int:
        return len(self.atoms)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_dim(dim: int, max_dim: int) -> int:
    if dim > max_dim:
        raise DimensionOverflow(f"result dimension {dim} exceeds cap {max_dim}")
    return dim


def add_rv(x1: ProbInt, x2: ProbInt, engine: str = "fft",
           max_dim: int = DEFAULT_MAX_DIM) -> ProbInt:
    """Distribution of X1 + X2 for independent X1, X2 (caller contract).

    engine="fft" uses the stabilized log-domain convolution; engine="naive"
    uses the exact quadratic linear-domain baseline.
    """
    _check_dim(x1.dim + x2.dim - 1, max_dim)
    offset = check_offset(x1.offset + x2.offset)
    if x1.max_log == -math.inf or x2.max_log == -math.inf:
        raise AllZeroMass("convolution input has no positive mass")
    if engine == "fft":
        log_mass = fftconv.log_conv_exp(x1.log_mass, x2.log_mass)
    elif engine == "naive":
        log_mass = fftconv.log_naive_from_logs(x1.log_mass, x2.log_mass)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return unchecked(_freeze(log_mass), offset)


def add_const(x: ProbInt, k: int) -> ProbInt:
    if k == 0:
        return x
    return unchecked(x.log_mass, check_offset(x.offset + k))


def negate(x: ProbInt) -> ProbInt:
    offset = check_offset(-(x.offset + x.dim - 1))
    return unchecked(_freeze(x.log_mass[::-1].copy()), offset)


def mul_const(x: ProbInt, k: int, max_dim: int = DEFAULT_MAX_DIM) -> ProbInt:
    """Distribution of k*X: k-1 impossible outcomes between consecutive entries."""
    if k == 1:
        return x
    if k == 0:
        # Pushforward of everything onto 0, keeping the total mass.
        total_log = _log_total(x.log_mass, x.max_log)
        return unchecked(np.array([total_log]), 0)
    if k < 0:
        return mul_const(negate(x), -k, max_dim=max_dim)
    dim = _check_dim((x.dim - 1) * k + 1, max_dim)
    check_offset(x.offset * k)
    check_offset((x.offset + x.dim - 1) * k)
    out = np.full(dim, -np.inf)
    out[::k] = x.log_mass
    return unchecked(_freeze(out), x.offset * k)


def _log_total(log_mass: np.ndarray, mu: float) -> float:
    if mu == -np.inf:
        return -np.inf
    return mu + math.log(math.fsum(np.exp(log_mass - mu)))


def _pad_for_grouping(x: ProbInt, k: int) -> tuple[np.ndarray, int, int]:
    """Zero-pad so offset and length are multiples of k.

    Returns (padded log vector, padded offset, pad amount below).
    """
    pad_lo = x.offset % k
    padded_offset = x.offset - pad_lo
    d = pad_lo + x.dim
    pad_hi = (-d) % k
    padded = np.full(d + pad_hi, -np.inf)
    padded[pad_lo : pad_lo + x.dim] = x.log_mass
    return padded, padded_offset, pad_lo


def _group_log_sum(groups: np.ndarray, axis: int) -> np.ndarray:
    """Log of the linear-domain sum along an axis, stabilized per group.

    Scaling by each group's own maximum (not a global one) keeps groups
    independent: perturbing one entry leaves every other group's output
    bit-identical, which finite-difference gradient checks depend on.
    """
    mu = groups.max(axis=axis)
    safe_mu = np.where(np.isfinite(mu), mu, 0.0)
    shifted = groups - np.expand_dims(safe_mu, axis)
    lin = np.exp(shifted).sum(axis=axis)
    with np.errstate(divide="ignore"):
        return np.log(lin) + mu


def div_const(x: ProbInt, k: int) -> ProbInt:
    """Distribution of X // k (floor division toward -infinity)."""
    if k < 1:
        raise InvalidDivisor(f"division constant must be >= 1, got {k}")
    if k == 1:
        return x
    padded, padded_offset, _ = _pad_for_grouping(x, k)
    groups = padded.reshape(-1, k)
    out = _group_log_sum(groups, axis=1)
    return unchecked(_freeze(out), padded_offset // k)


def mod_const(x: ProbInt, k: int) -> ProbInt:
    """Distribution of X mod k (mathematical modulo, support 0..k-1)."""
    if k < 1:
        raise InvalidDivisor(f"modulo constant must be >= 1, got {k}")
    padded, _, _ = _pad_for_grouping(x, k)
    groups = padded.reshape(-1, k)
    out = _group_log_sum(groups, axis=0)
    return unchecked(_freeze(out), 0)


def apply_chain(x: ProbInt, chain: LinearOpChain,
                max_dim: int = DEFAULT_MAX_DIM) -> ProbInt:
    """Pushforward of x through the chain, one atomic op at a time."""
    for kind, k in chain.atoms:
        if kind == "shift":
            x = add_const(x, k)
        elif kind == "negate":
            x = negate(x)
        elif kind == "scale":
            x = mul_const(x, k, max_dim=max_dim)
        elif kind == "idiv":
            x = div_const(x, k)
        else:
            x = mod_const(x, k)
    return x
