"""Shared test helpers: reference implementations kept independent of the engine."""

from __future__ import annotations

import math

import numpy as np


def scalar_luhn_check(digits: list[int]) -> int:
    """Plain-integer Luhn check value; 0 means the identifier is valid."""
    n = len(digits)
    check = 0
    for i, d in enumerate(digits):
        if i % 2 == n % 2:
            d = 2 * d if d < 5 else 2 * d - 9
        check = (check + d) % 10
    return check


def pushforward_dict(x, fn) -> dict[int, float]:
    """Enumerated distribution of fn(X) for a single ProbInt, exact sums."""
    buckets: dict[int, list[float]] = {}
    masses = np.exp(x.log_mass)
    for i in range(x.dim):
        m = float(masses[i])
        if m == 0.0:
            continue
        buckets.setdefault(fn(x.offset + i), []).append(m)
    return {v: math.fsum(ms) for v, ms in buckets.items()}


def pair_pushforward_dict(x1, x2, fn) -> dict[int, float]:
    """Enumerated distribution of fn(X1, X2) over two independent ProbInts."""
    buckets: dict[int, list[float]] = {}
    m1 = np.exp(x1.log_mass)
    m2 = np.exp(x2.log_mass)
    for i in range(x1.dim):
        for j in range(x2.dim):
            w = float(m1[i]) * float(m2[j])
            if w == 0.0:
                continue
            buckets.setdefault(fn(x1.offset + i, x2.offset + j), []).append(w)
    return {v: math.fsum(ms) for v, ms in buckets.items()}


def dist_dict(x) -> dict[int, float]:
    masses = np.exp(x.log_mass)
    return {x.offset + i: float(masses[i]) for i in range(x.dim)}


def max_dict_diff(a: dict[int, float], b: dict[int, float]) -> float:
    keys = set(a) | set(b)
    return max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)
