"""Brute-force reference semantics by exhaustive joint enumeration.

Every query a program can ask is also answerable by iterating the full joint
outcome space of its declared pints, evaluating expressions deterministically
per assignment, and accumulating weights.  That is hopeless at scale and
exactly the point: it is the ground truth the engine is tested against.

Deterministic evaluation is compiled once per program into a Python closure
whose // and mod calls go through the same atomic-op implementation the
engine's chains use, so the two sides cannot drift apart semantically.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Sequence

import numpy as np

from . import lang
from .errors import StateSpaceTooLarge
from .infer import COMPARATORS
from .ops import apply_atom_int
from .pmf import ProbInt

DEFAULT_CAP = 10**7


def _idiv(v: int, k: int) -> int:
    return apply_atom_int("idiv", k, v)


def _imod(v: int, k: int) -> int:
    return apply_atom_int("imod", k, v)


def _expr_code(expr: lang.Expr, names: dict[str, str]) -> str:
    if isinstance(expr, lang.Var):
        return names[expr.name]
    if isinstance(expr, lang.IntLit):
        return repr(expr.value)
    if isinstance(expr, lang.Add):
        return f"({_expr_code(expr.left, names)} + {_expr_code(expr.right, names)})"
    if isinstance(expr, lang.AddConst):
        return f"({_expr_code(expr.operand, names)} + {expr.const})"
    if isinstance(expr, lang.Neg):
        return f"(-{_expr_code(expr.operand, names)})"
    if isinstance(expr, lang.MulConst):
        return f"({_expr_code(expr.operand, names)} * {expr.const})"
    if isinstance(expr, lang.IDiv):
        return f"_idiv({_expr_code(expr.operand, names)}, {expr.const})"
    if isinstance(expr, lang.Mod):
        return f"_imod({_expr_code(expr.operand, names)}, {expr.const})"
    if isinstance(expr, lang.IfThenElse):
        cond = f"({names[expr.var]} {expr.comparator} {expr.rhs})"
        return (
            f"(({_expr_code(expr.then_expr, names)}) if {cond} "
            f"else ({_expr_code(expr.else_expr, names)}))"
        )
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def compile_deterministic(p: lang.Program, expr: lang.Expr) -> Callable[..., int]:
    """Integer-semantics evaluator of expr as a function of the leaf pints."""
    names = {name: f"v_{i}" for i, name in enumerate(p.decls)}
    lines = [f"def _f({', '.join(names[n] for n in p.decls)}):"]
    for bname, bexpr in p.bindings.items():
        names[bname] = f"b_{len(names)}"
        lines.append(f"    {names[bname]} = {_expr_code(bexpr, names)}")
    lines.append(f"    return {_expr_code(expr, names)}")
    namespace = {"_idiv": _idiv, "_imod": _imod}
    exec("\n".join(lines), namespace)  # code generated from our own AST only
    return namespace["_f"]


class _Kahan:
    """Compensated accumulator for one output bucket."""

    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, v: float):
        y = v - self.c
        t = self.s + y
        self.c = (t - self.s) - y
        self.s = t


def _leaf_supports(p: lang.Program, cap: int):
    supports = []
    total = 1
    for name, dist in p.decls.items():
        x = lang.build_dist(dist)
        total *= x.dim
        if total > cap:
            raise StateSpaceTooLarge(
                f"joint outcome space exceeds cap {cap} at pint {name!r}"
            )
        values = list(range(x.lo, x.hi + 1))
        masses = [float(m) for m in np.exp(x.log_mass)]
        supports.append(list(zip(values, masses)))
    return supports


def enumerate_query(p: lang.Program, q: lang.Query, cap: int = DEFAULT_CAP):
    """Evaluate one query by full enumeration.

    Returns a float for E/Pr queries and (offset, masses) for pmf queries.
    """
    supports = _leaf_supports(p, cap)
    fn = compile_deterministic(p, q.expr)
    assignments = itertools.product(*supports)

    if isinstance(q, lang.ExpectQuery):
        return math.fsum(
            fn(*(v for v, _ in a)) * math.prod(m for _, m in a) for a in assignments
        )
    if isinstance(q, lang.ProbQuery):
        cmp = COMPARATORS[q.comparator]
        return math.fsum(
            math.prod(m for _, m in a)
            for a in assignments
            if cmp(fn(*(v for v, _ in a)), q.rhs)
        )
    buckets: dict[int, _Kahan] = {}
    for a in assignments:
        w = math.prod(m for _, m in a)
        out = fn(*(v for v, _ in a))
        acc = buckets.get(out)
        if acc is None:
            acc = buckets[out] = _Kahan()
        acc.add(w)
    lo = min(buckets)
    hi = max(buckets)
    masses = [buckets[v].s if v in buckets else 0.0 for v in range(lo, hi + 1)]
    return lo, masses


def joint_pushforward(
    leaves: Sequence[ProbInt], fn: Callable[..., int], cap: int = DEFAULT_CAP
) -> tuple[int, np.ndarray]:
    """Distribution of fn(X1, ..., Xn) over independent pints, by enumeration."""
    total = 1
    supports = []
    for x in leaves:
        total *= x.dim
        if total > cap:
            raise StateSpaceTooLarge(f"joint outcome space exceeds cap {cap}")
        values = range(x.lo, x.hi + 1)
        masses = np.exp(x.log_mass)
        supports.append([(v, float(m)) for v, m in zip(values, masses)])
    buckets: dict[int, _Kahan] = {}
    for a in itertools.product(*supports):
        w = math.prod(m for _, m in a)
        if w == 0.0:
            continue
        out = fn(*(v for v, _ in a))
        acc = buckets.get(out)
        if acc is None:
            acc = buckets[out] = _Kahan()
        acc.add(w)
    if not buckets:
        return 0, np.zeros(1)
    lo = min(buckets)
    hi = max(buckets)
    return lo, np.array([buckets[v].s if v in buckets else 0.0 for v in range(lo, hi + 1)])
