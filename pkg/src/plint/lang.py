"""A small text language for probabilistic linear integer arithmetic.

Statements::

    pint X ~ uniform(0,9);            # declare a random integer
    pint W ~ pmf{0:0.2, 1:0.8};       # explicit masses (may be unnormalized)
    let V = if (X < 5) then 2*X else 2*X - 9;
    query E[V];                       # expectation
    query Pr[V + W == 3];             # comparison probability
    query pmf[V];                     # full distribution

Expressions are trees over declared names: a pint may feed each ``+`` at most
once, which makes the independence assumption behind random-variable addition
hold by construction.  ``//`` is floor division and ``mod`` is mathematical
modulo.  Branch arms of an if-then-else may reference only the conditioned
variable (compositions of +k, -, *k, //k, mod k, possibly nested branches).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import infer, ops
from .errors import (
    DslSyntaxError,
    DuplicateName,
    EvalError,
    PlintError,
    SourceError,
    UnknownName,
)
from .pmf import ProbInt, check_normalized, from_probs, point, uniform

KEYWORDS = {
    "pint", "let", "query", "if", "then", "else", "mod",
    "uniform", "point", "pmf", "E", "Pr",
}
CMP_TOKENS = ("<=", ">=", "==", "!=", "<", ">")
STRICT_TOL = 1e-9


# ---------------------------------------------------------------------------
# tokens

@dataclass(frozen=True)
class Token:
    kind: str  # IDENT INT FLOAT KEYWORD SYM EOF
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            tokens.append(Token("FLOAT" if is_float else "INT", text, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "KEYWORD" if text in KEYWORDS else "IDENT"
            tokens.append(Token(kind, text, start_line, start_col))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two in ("<=", ">=", "==", "!=", "//"):
            tokens.append(Token("SYM", two, start_line, start_col))
            i += 2
            col += 2
            continue
        if ch in "~;(){}[]:,+-*<>=":
            tokens.append(Token("SYM", ch, start_line, start_col))
            i += 1
            col += 1
            continue
        raise DslSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class AddConst(Expr):
    operand: Expr
    const: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class MulConst(Expr):
    operand: Expr
    const: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class IDiv(Expr):
    operand: Expr
    const: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Mod(Expr):
    operand: Expr
    const: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class IfThenElse(Expr):
    var: str
    comparator: str
    rhs: int
    then_expr: Expr
    else_expr: Expr
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class UniformDist:
    lo: int
    hi: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class PointDist:
    value: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class PmfDist:
    entries: tuple  # ((outcome, weight), ...) in source order
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


DistSpec = Union[UniformDist, PointDist, PmfDist]


@dataclass(frozen=True)
class ExpectQuery:
    expr: Expr
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ProbQuery:
    expr: Expr
    comparator: str
    rhs: int
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class PmfQuery:
    expr: Expr
    loc: tuple = field(default=(0, 0), compare=False, repr=False)


Query = Union[ExpectQuery, ProbQuery, PmfQuery]


@dataclass
class Program:
    decls: dict[str, DistSpec]
    bindings: dict[str, Expr]
    queries: list[Query]


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise DslSyntaxError(message, tok.line, tok.col)

    def expect_sym(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind == "SYM" and tok.text == text:
            return self.next()
        self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == word:
            return self.next()
        self.fail(f"expected {word!r}, found {tok.text or 'end of input'!r}")

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind == "IDENT":
            return self.next()
        if tok.kind == "KEYWORD":
            self.fail(f"{tok.text!r} is a reserved word")
        self.fail(f"expected a name, found {tok.text or 'end of input'!r}")

    def parse_signed_int(self) -> int:
        tok = self.peek()
        if tok.kind == "SYM" and tok.text == "-":
            self.next()
            inner = self.peek()
            if inner.kind != "INT":
                self.fail("expected an integer after '-'")
            self.next()
            return -int(inner.text)
        if tok.kind == "INT":
            self.next()
            return int(tok.text)
        self.fail(f"expected an integer, found {tok.text or 'end of input'!r}")

    def parse_number(self) -> float:
        tok = self.peek()
        sign = 1.0
        if tok.kind == "SYM" and tok.text == "-":
            self.next()
            tok = self.peek()
            sign = -1.0
        if tok.kind in ("INT", "FLOAT"):
            self.next()
            return sign * float(tok.text)
        self.fail(f"expected a number, found {tok.text or 'end of input'!r}")

    def parse_comparator(self) -> str:
        tok = self.peek()
        if tok.kind == "SYM" and tok.text in CMP_TOKENS:
            self.next()
            return tok.text
        self.fail(f"expected a comparison operator, found {tok.text or 'end of input'!r}")

    # -- statements ---------------------------------------------------------

    def parse_program(self) -> Program:
        decls: dict[str, DistSpec] = {}
        bindings: dict[str, Expr] = {}
        queries: list[Query] = []
        known: set[str] = set()
        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.kind == "KEYWORD" and tok.text == "pint":
                name_tok, dist = self.parse_decl(known)
                decls[name_tok.text] = dist
                known.add(name_tok.text)
            elif tok.kind == "KEYWORD" and tok.text == "let":
                name_tok, expr = self.parse_let(known)
                bindings[name_tok.text] = expr
                known.add(name_tok.text)
            elif tok.kind == "KEYWORD" and tok.text == "query":
                queries.append(self.parse_query(known))
            else:
                self.fail(
                    f"expected 'pint', 'let' or 'query', found {tok.text or 'end of input'!r}"
                )
        return Program(decls, bindings, queries)

    def parse_decl(self, known: set[str]):
        self.expect_keyword("pint")
        name = self.expect_ident()
        if name.text in known:
            raise DuplicateName(f"name {name.text!r} already defined", name.line, name.col)
        self.expect_sym("~")
        dist = self.parse_dist()
        self.expect_sym(";")
        return name, dist

    def parse_dist(self) -> DistSpec:
        tok = self.peek()
        loc = (tok.line, tok.col)
        if tok.kind == "KEYWORD" and tok.text == "uniform":
            self.next()
            self.expect_sym("(")
            lo = self.parse_signed_int()
            self.expect_sym(",")
            hi = self.parse_signed_int()
            self.expect_sym(")")
            return UniformDist(lo, hi, loc=loc)
        if tok.kind == "KEYWORD" and tok.text == "point":
            self.next()
            self.expect_sym("(")
            v = self.parse_signed_int()
            self.expect_sym(")")
            return PointDist(v, loc=loc)
        if tok.kind == "KEYWORD" and tok.text == "pmf":
            self.next()
            self.expect_sym("{")
            entries = []
            seen = set()
            while True:
                out_tok = self.peek()
                outcome = self.parse_signed_int()
                if outcome in seen:
                    self.fail(f"duplicate outcome {outcome} in pmf", out_tok)
                seen.add(outcome)
                self.expect_sym(":")
                weight = self.parse_number()
                entries.append((outcome, weight))
                if self.peek().text == ",":
                    self.next()
                    continue
                break
            self.expect_sym("}")
            return PmfDist(tuple(entries), loc=loc)
        self.fail(f"expected a distribution, found {tok.text or 'end of input'!r}")

    def parse_let(self, known: set[str]):
        self.expect_keyword("let")
        name = self.expect_ident()
        if name.text in known:
            raise DuplicateName(f"name {name.text!r} already defined", name.line, name.col)
        self.expect_sym("=")
        expr = self.parse_expr(known)
        self.expect_sym(";")
        return name, expr

    def parse_query(self, known: set[str]) -> Query:
        kw = self.expect_keyword("query")
        loc = (kw.line, kw.col)
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == "E":
            self.next()
            self.expect_sym("[")
            expr = self.parse_expr(known)
            self.expect_sym("]")
            self.expect_sym(";")
            return ExpectQuery(expr, loc=loc)
        if tok.kind == "KEYWORD" and tok.text == "Pr":
            self.next()
            self.expect_sym("[")
            expr = self.parse_expr(known)
            cmp = self.parse_comparator()
            rhs = self.parse_signed_int()
            self.expect_sym("]")
            self.expect_sym(";")
            return ProbQuery(expr, cmp, rhs, loc=loc)
        if tok.kind == "KEYWORD" and tok.text == "pmf":
            self.next()
            self.expect_sym("[")
            expr = self.parse_expr(known)
            self.expect_sym("]")
            self.expect_sym(";")
            return PmfQuery(expr, loc=loc)
        self.fail(f"expected 'E', 'Pr' or 'pmf', found {tok.text or 'end of input'!r}")

    # -- expressions --------------------------------------------------------

    def parse_expr(self, known: set[str]) -> Expr:
        left = self.parse_term(known)
        while True:
            tok = self.peek()
            if tok.kind == "SYM" and tok.text in ("+", "-"):
                self.next()
                right = self.parse_term(known)
                loc = (tok.line, tok.col)
                if tok.text == "-":
                    right = (
                        IntLit(-right.value, loc=right.loc)
                        if isinstance(right, IntLit)
                        else Neg(right, loc=loc)
                    )
                left = self._make_add(left, right, loc)
            else:
                return left

    @staticmethod
    def _make_add(left: Expr, right: Expr, loc: tuple) -> Expr:
        # Fold integer-literal operands into constant additions.
        if isinstance(right, IntLit):
            return AddConst(left, right.value, loc=loc)
        if isinstance(left, IntLit):
            return AddConst(right, left.value, loc=loc)
        return Add(left, right, loc=loc)

    def parse_term(self, known: set[str]) -> Expr:
        expr = self.parse_factor(known)
        while True:
            tok = self.peek()
            if tok.kind == "SYM" and tok.text in ("*", "//"):
                op = tok.text
                loc = (tok.line, tok.col)
                # "INT * factor" form: a leading literal multiplies what follows.
                if (
                    op == "*"
                    and isinstance(expr, IntLit)
                    and not self._const_follows(1)
                ):
                    self.next()
                    operand = self.parse_factor(known)
                    expr = MulConst(operand, expr.value, loc=loc)
                    continue
                self.next()
                k = self.parse_signed_int()
                expr = (
                    MulConst(expr, k, loc=loc) if op == "*" else IDiv(expr, k, loc=loc)
                )
            elif tok.kind == "KEYWORD" and tok.text == "mod":
                loc = (tok.line, tok.col)
                self.next()
                k = self.parse_signed_int()
                expr = Mod(expr, k, loc=loc)
            else:
                return expr

    def _const_follows(self, ahead: int) -> bool:
        tok = self.peek(ahead)
        if tok.kind == "INT":
            return True
        return tok.kind == "SYM" and tok.text == "-" and self.peek(ahead + 1).kind == "INT"

    def parse_factor(self, known: set[str]) -> Expr:
        tok = self.peek()
        loc = (tok.line, tok.col)
        if tok.kind == "SYM" and tok.text == "-":
            self.next()
            inner = self.parse_factor(known)
            if isinstance(inner, IntLit):
                return IntLit(-inner.value, loc=loc)
            return Neg(inner, loc=loc)
        if tok.kind == "INT":
            self.next()
            return IntLit(int(tok.text), loc=loc)
        if tok.kind == "IDENT":
            if tok.text not in known:
                raise UnknownName(f"unknown name {tok.text!r}", tok.line, tok.col)
            self.next()
            return Var(tok.text, loc=loc)
        if tok.kind == "SYM" and tok.text == "(":
            self.next()
            expr = self.parse_expr(known)
            self.expect_sym(")")
            return expr
        if tok.kind == "KEYWORD" and tok.text == "if":
            return self.parse_if(known)
        self.fail(f"expected an expression, found {tok.text or 'end of input'!r}")

    def parse_if(self, known: set[str]) -> Expr:
        kw = self.expect_keyword("if")
        loc = (kw.line, kw.col)
        self.expect_sym("(")
        var = self.expect_ident()
        if var.text not in known:
            raise UnknownName(f"unknown name {var.text!r}", var.line, var.col)
        cmp = self.parse_comparator()
        rhs = self.parse_signed_int()
        self.expect_sym(")")
        self.expect_keyword("then")
        then_expr = self.parse_expr(known)
        self.expect_keyword("else")
        else_expr = self.parse_expr(known)
        node = IfThenElse(var.text, cmp, rhs, then_expr, else_expr, loc=loc)
        for arm in (then_expr, else_expr):
            bad = _non_branch_names(arm, var.text)
            if bad:
                raise DslSyntaxError(
                    f"branch expression may only reference the conditioned "
                    f"variable {var.text!r}, found {sorted(bad)[0]!r}",
                    *loc,
                )
            if _contains_add(arm):
                raise DslSyntaxError(
                    "branch expression may not add two random terms; it must "
                    f"be a linear function of {var.text!r}",
                    *loc,
                )
        return node


def _non_branch_names(expr: Expr, var: str) -> set[str]:
    names = free_names(expr)
    names.discard(var)
    return names


def _contains_add(expr: Expr) -> bool:
    if isinstance(expr, Add):
        return True
    if isinstance(expr, (AddConst, Neg, MulConst, IDiv, Mod)):
        return _contains_add(expr.operand)
    if isinstance(expr, IfThenElse):
        return _contains_add(expr.then_expr) or _contains_add(expr.else_expr)
    return False


def free_names(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, IntLit):
        return set()
    if isinstance(expr, Add):
        return free_names(expr.left) | free_names(expr.right)
    if isinstance(expr, (AddConst, Neg, MulConst, IDiv, Mod)):
        return free_names(expr.operand)
    if isinstance(expr, IfThenElse):
        return {expr.var} | free_names(expr.then_expr) | free_names(expr.else_expr)
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def parse(source: str) -> Program:
    """Parse DSL source text into a Program; raises SourceError subclasses."""
    return _Parser(tokenize(source)).parse_program()


# ---------------------------------------------------------------------------
# pretty printing

def _format_weight(w: float) -> str:
    return repr(w)


def pretty_expr(expr: Expr, level: int = -1) -> str:
    """Render an expression.

    level -1 = whole statement/arm, 0 = additive operand, 1 = term operand,
    2 = factor operand.  If-then-else binds loosest (its else arm is greedy),
    so it is parenthesized anywhere below statement level.
    """
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, Add):
        if isinstance(expr.right, Neg):
            text = f"{pretty_expr(expr.left, 0)} - {pretty_expr(expr.right.operand, 1)}"
        else:
            text = f"{pretty_expr(expr.left, 0)} + {pretty_expr(expr.right, 1)}"
        return f"({text})" if level > 0 else text
    if isinstance(expr, AddConst):
        op, k = ("-", -expr.const) if expr.const < 0 else ("+", expr.const)
        text = f"{pretty_expr(expr.operand, 0)} {op} {k}"
        return f"({text})" if level > 0 else text
    if isinstance(expr, Neg):
        return f"-{pretty_expr(expr.operand, 2)}"
    if isinstance(expr, (MulConst, IDiv, Mod)):
        sym = {"MulConst": "*", "IDiv": "//", "Mod": "mod"}[type(expr).__name__]
        text = f"{pretty_expr(expr.operand, 1)} {sym} {expr.const}"
        return f"({text})" if level > 1 else text
    if isinstance(expr, IfThenElse):
        text = (
            f"if ({expr.var} {expr.comparator} {expr.rhs}) "
            f"then {pretty_expr(expr.then_expr)} "
            f"else {pretty_expr(expr.else_expr)}"
        )
        return f"({text})" if level > -1 else text
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def pretty_query(q: Query) -> str:
    if isinstance(q, ExpectQuery):
        return f"E[{pretty_expr(q.expr)}]"
    if isinstance(q, ProbQuery):
        return f"Pr[{pretty_expr(q.expr)} {q.comparator} {q.rhs}]"
    return f"pmf[{pretty_expr(q.expr)}]"


def pretty_program(p: Program) -> str:
    lines = []
    for name, dist in p.decls.items():
        if isinstance(dist, UniformDist):
            lines.append(f"pint {name} ~ uniform({dist.lo}, {dist.hi});")
        elif isinstance(dist, PointDist):
            lines.append(f"pint {name} ~ point({dist.value});")
        else:
            body = ", ".join(f"{o}: {_format_weight(w)}" for o, w in dist.entries)
            lines.append(f"pint {name} ~ pmf{{{body}}};")
    for name, expr in p.bindings.items():
        lines.append(f"let {name} = {pretty_expr(expr)};")
    for q in p.queries:
        lines.append(f"query {pretty_query(q)};")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# independence check

@dataclass(frozen=True)
class Violation:
    message: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


def _leaf_counts(expr: Expr, bindings: dict[str, Expr], decls) -> Counter:
    """Multiset of pint leaves reached by an expression, expanding bindings."""
    if isinstance(expr, Var):
        if expr.name in bindings:
            return _leaf_counts(bindings[expr.name], bindings, decls)
        return Counter({expr.name: 1})
    if isinstance(expr, IntLit):
        return Counter()
    if isinstance(expr, Add):
        return _leaf_counts(expr.left, bindings, decls) + _leaf_counts(
            expr.right, bindings, decls
        )
    if isinstance(expr, (AddConst, Neg, MulConst, IDiv, Mod)):
        return _leaf_counts(expr.operand, bindings, decls)
    if isinstance(expr, IfThenElse):
        # Condition and branches share the one conditioned variable; the two
        # arms are mutually exclusive, so the variable counts once.
        return _leaf_counts(Var(expr.var), bindings, decls)
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def check_independence(p: Program) -> list[Violation]:
    """Flag pint leaves feeding both operands of any random-variable addition."""
    violations: list[Violation] = []

    def walk(expr: Expr):
        if isinstance(expr, Add):
            walk(expr.left)
            walk(expr.right)
            shared = set(_leaf_counts(expr.left, p.bindings, p.decls)) & set(
                _leaf_counts(expr.right, p.bindings, p.decls)
            )
            for name in sorted(shared):
                violations.append(
                    Violation(
                        f"pint {name!r} appears on both sides of '+'",
                        expr.loc[0],
                        expr.loc[1],
                    )
                )
        elif isinstance(expr, (AddConst, Neg, MulConst, IDiv, Mod)):
            walk(expr.operand)
        elif isinstance(expr, IfThenElse):
            walk(expr.then_expr)
            walk(expr.else_expr)

    for expr in p.bindings.values():
        walk(expr)
    for q in p.queries:
        walk(q.expr)
    return violations


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class QueryResult:
    text: str
    kind: str  # "E" | "Pr" | "pmf"
    value: float | None = None
    offset: int | None = None
    masses: list[float] | None = None

    def format_value(self) -> str:
        if self.kind == "pmf":
            body = ", ".join(f"{m:.12g}" for m in self.masses)
            return f"({self.offset}, [{body}])"
        return f"{self.value:.12g}"


def build_dist(dist: DistSpec) -> ProbInt:
    if isinstance(dist, UniformDist):
        return uniform(dist.lo, dist.hi)
    if isinstance(dist, PointDist):
        return point(dist.value)
    outcomes = [o for o, _ in dist.entries]
    lo, hi = min(outcomes), max(outcomes)
    probs = np.zeros(hi - lo + 1)
    for outcome, weight in dist.entries:
        probs[outcome - lo] = weight
    return from_probs(probs, lo)


def compile_chain(expr: Expr, var: str) -> ops.LinearOpChain:
    """Translate a branch arm into a linear chain over the conditioned variable."""
    atoms: list[tuple[str, int]] = []

    def go(e: Expr):
        if isinstance(e, Var):
            return
        if isinstance(e, IntLit):
            # A constant arm: collapse everything to 0, then shift.
            atoms.append(ops.scale(0))
            atoms.append(ops.shift(e.value))
            return
        if isinstance(e, AddConst):
            go(e.operand)
            atoms.append(ops.shift(e.const))
            return
        if isinstance(e, Neg):
            go(e.operand)
            atoms.append(ops.negate_op())
            return
        if isinstance(e, MulConst):
            go(e.operand)
            atoms.append(ops.scale(e.const))
            return
        if isinstance(e, IDiv):
            go(e.operand)
            atoms.append(ops.idiv(e.const))
            return
        if isinstance(e, Mod):
            go(e.operand)
            atoms.append(ops.imod(e.const))
            return
        raise EvalError(
            f"branch expression must be a linear function of {var!r}",
            *getattr(e, "loc", (0, 0)),
        )

    go(expr)
    return ops.LinearOpChain(tuple(atoms))


def _ite_condition(node: IfThenElse) -> infer.Condition:
    # var cmp rhs  <=>  (var - rhs) cmp 0
    return infer.Condition(ops.LinearOpChain((ops.shift(-node.rhs),)), node.comparator)


def _has_nested_ite(expr: Expr) -> bool:
    if isinstance(expr, IfThenElse):
        return True
    if isinstance(expr, (AddConst, Neg, MulConst, IDiv, Mod)):
        return _has_nested_ite(expr.operand)
    return False


def _eval_ite(x: ProbInt, node: IfThenElse) -> ProbInt:
    simple = not _has_nested_ite(node.then_expr) and not _has_nested_ite(node.else_expr)
    if simple and np.isfinite(x.log_mass).any():
        spec = infer.BranchSpec(
            _ite_condition(node),
            compile_chain(node.then_expr, node.var),
            compile_chain(node.else_expr, node.var),
        )
        return infer.branch(x, spec)
    # Nested branches: refine the mask recursively, push each piece through
    # its remaining operations, and recombine by mass addition.
    mask = infer.condition_mask(x, _ite_condition(node))
    x_true, x_false = infer.mask_split(x, mask)
    pushed_true = _eval_arm(x_true, node.then_expr, node.var)
    pushed_false = _eval_arm(x_false, node.else_expr, node.var)
    if pushed_true is None:
        return pushed_false
    if pushed_false is None:
        return pushed_true
    return infer.superpose(pushed_true, pushed_false)


def _eval_arm(x: ProbInt | None, expr: Expr, var: str) -> ProbInt | None:
    """Pushforward of a masked piece through one branch arm.

    The arm is a unary-op tree over the conditioned variable, possibly with
    further if-then-else nodes inside; inner conditions still test the
    original variable, so masks always refine the untransformed piece before
    any op above them is applied.
    """
    if x is None:
        return None
    if isinstance(expr, Var):
        return x
    if isinstance(expr, IntLit):
        return ops.apply_chain(x, ops.LinearOpChain((ops.scale(0), ops.shift(expr.value))))
    if isinstance(expr, AddConst):
        return ops.add_const(_eval_arm(x, expr.operand, var), expr.const)
    if isinstance(expr, Neg):
        return ops.negate(_eval_arm(x, expr.operand, var))
    if isinstance(expr, MulConst):
        return ops.mul_const(_eval_arm(x, expr.operand, var), expr.const)
    if isinstance(expr, IDiv):
        return ops.div_const(_eval_arm(x, expr.operand, var), expr.const)
    if isinstance(expr, Mod):
        return ops.mod_const(_eval_arm(x, expr.operand, var), expr.const)
    if isinstance(expr, IfThenElse):
        return _eval_ite(x, expr)
    raise EvalError(
        f"branch expression must be a linear function of {var!r}",
        *getattr(expr, "loc", (0, 0)),
    )


def eval_expr(expr: Expr, env: dict[str, ProbInt]) -> ProbInt:
    try:
        if isinstance(expr, Var):
            return env[expr.name]
        if isinstance(expr, IntLit):
            return point(expr.value)
        if isinstance(expr, Add):
            return ops.add_rv(eval_expr(expr.left, env), eval_expr(expr.right, env))
        if isinstance(expr, AddConst):
            return ops.add_const(eval_expr(expr.operand, env), expr.const)
        if isinstance(expr, Neg):
            return ops.negate(eval_expr(expr.operand, env))
        if isinstance(expr, MulConst):
            return ops.mul_const(eval_expr(expr.operand, env), expr.const)
        if isinstance(expr, IDiv):
            return ops.div_const(eval_expr(expr.operand, env), expr.const)
        if isinstance(expr, Mod):
            return ops.mod_const(eval_expr(expr.operand, env), expr.const)
        if isinstance(expr, IfThenElse):
            return _eval_ite(env[expr.var], expr)
    except SourceError:
        raise
    except PlintError as e:
        raise EvalError(str(e), *getattr(expr, "loc", (0, 0))) from e
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def evaluate(p: Program, strict: bool = False) -> list[QueryResult]:
    """Run all queries of a program; engine errors carry source locations."""
    violations = check_independence(p)
    if violations:
        v = violations[0]
        raise EvalError(f"independence violation: {v.message}", v.line, v.col)

    env: dict[str, ProbInt] = {}
    for name, dist in p.decls.items():
        try:
            x = build_dist(dist)
        except PlintError as e:
            raise EvalError(f"in pint {name!r}: {e}", *dist.loc) from e
        if strict and not check_normalized(x, STRICT_TOL):
            raise EvalError(
                f"strict mode: pint {name!r} has total mass {x.total_mass():.12g}, "
                f"expected 1 within {STRICT_TOL:g}",
                *dist.loc,
            )
        env[name] = x
    for name, expr in p.bindings.items():
        env[name] = eval_expr(expr, env)

    results: list[QueryResult] = []
    for q in p.queries:
        x = eval_expr(q.expr, env)
        text = pretty_query(q)
        try:
            if isinstance(q, ExpectQuery):
                results.append(QueryResult(text, "E", value=infer.expectation(x)))
            elif isinstance(q, ProbQuery):
                results.append(
                    QueryResult(text, "Pr", value=infer.prob_cmp(x, q.comparator, q.rhs))
                )
            else:
                results.append(
                    QueryResult(
                        text,
                        "pmf",
                        offset=x.offset,
                        masses=[float(m) for m in np.exp(x.log_mass)],
                    )
                )
        except PlintError as e:
            raise EvalError(str(e), *q.loc) from e
    return results
