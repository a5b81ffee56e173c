"""Reverse-mode differentiation of scalar queries through engine operations.

A ``Tape`` records every operation as a node holding its forward value plus
whatever the backward pass needs.  Cotangents live in the linear mass domain;
each operation's adjoint is the transpose of its (linear) forward map:

* random-variable addition back-propagates by correlating the cotangent with
  the other factor's mass vector, reusing the FFT machinery;
* shift / negate / scale ops are index permutations, so their adjoints are
  the inverse permutations (gather with stride for scale);
* division broadcasts each output cotangent to its k source entries, modulo
  to every congruent source entry;
* branching splits the cotangent through the two chains and recombines it
  through the condition masks, which are constants of the tape (the mask
  depends on support points, never on mass values, so no gradient flows
  through the condition itself).

Leaves map mass cotangents to logit gradients: raw leaves via d(mass)/d(log
mass) = mass, softmax leaves via the softmax Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import infer, ops
from .errors import NonScalarQuery, UnreachableLabel, UnrecordedNode
from .pmf import ProbInt, unchecked


@dataclass(eq=False)
class LeafParam:
    """Trainable leaf: a logits vector and how it maps to masses."""

    logits: np.ndarray
    parametrization: str = "raw"  # "raw" | "softmax"
    offset: int = 0

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64).copy()
        if self.parametrization not in ("raw", "softmax"):
            raise ValueError(f"unknown parametrization {self.parametrization!r}")

    def build(self) -> ProbInt:
        if self.parametrization == "softmax":
            log_mass = self.logits - _logsumexp(self.logits)
        else:
            log_mass = self.logits.copy()
        return ProbInt(log_mass, self.offset)


def _logsumexp(v: np.ndarray) -> float:
    m = float(v.max())
    return m + math.log(np.exp(v - m).sum())


@dataclass(eq=False)
class Node:
    tape: "Tape"
    idx: int
    kind: str
    parents: tuple[int, ...]
    const: dict
    value: ProbInt | float = None

    @property
    def is_scalar(self) -> bool:
        return self.kind in ("expect", "prob")


class Tape:
    """Append-only operation record; single writer, replayable."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.leaf_index: dict[LeafParam, int] = {}

    def _record(self, kind: str, parents: tuple[int, ...], const: dict) -> Node:
        node = Node(self, len(self.nodes), kind, parents, const)
        node.value = self._compute(node)
        self.nodes.append(node)
        return node

    # -- construction -------------------------------------------------------

    def leaf(self, param: LeafParam) -> Node:
        node = self._record("leaf", (), {"param": param})
        self.leaf_index.setdefault(param, node.idx)
        return node

    def add_rv(self, a: Node, b: Node) -> Node:
        return self._record("add_rv", (a.idx, b.idx), {})

    def add_const(self, a: Node, k: int) -> Node:
        return self._record("add_const", (a.idx,), {"k": int(k)})

    def negate(self, a: Node) -> Node:
        return self._record("negate", (a.idx,), {})

    def mul_const(self, a: Node, k: int) -> Node:
        k = int(k)
        if k == 1:
            return a
        if k == 0:
            return self._record("collapse", (a.idx,), {})
        if k < 0:
            return self.mul_const(self.negate(a), -k)
        return self._record("scale", (a.idx,), {"k": k})

    def div_const(self, a: Node, k: int) -> Node:
        if int(k) == 1:
            return a
        return self._record("div", (a.idx,), {"k": int(k)})

    def mod_const(self, a: Node, k: int) -> Node:
        return self._record("mod", (a.idx,), {"k": int(k)})

    def apply_chain(self, a: Node, chain: ops.LinearOpChain) -> Node:
        for kind, k in chain.atoms:
            if kind == "shift":
                a = self.add_const(a, k)
            elif kind == "negate":
                a = self.negate(a)
            elif kind == "scale":
                a = self.mul_const(a, k)
            elif kind == "idiv":
                a = self.div_const(a, k)
            else:
                a = self.mod_const(a, k)
        return a

    def branch(self, a: Node, spec: infer.BranchSpec) -> Node:
        mask = infer.condition_mask(a.value, spec.condition)
        if mask.all():
            return self.apply_chain(a, spec.true_chain)
        if not mask.any():
            return self.apply_chain(a, spec.false_chain)
        kept = self._record("mask", (a.idx,), {"mask": mask})
        dropped = self._record("mask", (a.idx,), {"mask": ~mask})
        pushed_true = self.apply_chain(kept, spec.true_chain)
        pushed_false = self.apply_chain(dropped, spec.false_chain)
        return self._record("superpose", (pushed_true.idx, pushed_false.idx), {})

    def expectation(self, a: Node) -> Node:
        return self._record("expect", (a.idx,), {})

    def prob_cmp(self, a: Node, comparator: str, rhs: int) -> Node:
        return self._record("prob", (a.idx,), {"cmp": comparator, "rhs": int(rhs)})

    # -- execution ----------------------------------------------------------

    def _compute(self, node: Node):
        vals = [self.nodes[i].value for i in node.parents]
        kind = node.kind
        if kind == "leaf":
            return node.const["param"].build()
        if kind == "add_rv":
            return ops.add_rv(vals[0], vals[1])
        if kind == "add_const":
            return ops.add_const(vals[0], node.const["k"])
        if kind == "negate":
            return ops.negate(vals[0])
        if kind == "collapse":
            return ops.mul_const(vals[0], 0)
        if kind == "scale":
            return ops.mul_const(vals[0], node.const["k"])
        if kind == "div":
            return ops.div_const(vals[0], node.const["k"])
        if kind == "mod":
            return ops.mod_const(vals[0], node.const["k"])
        if kind == "mask":
            x = vals[0]
            kept = np.where(node.const["mask"], x.log_mass, -np.inf)
            return unchecked(kept, x.offset)
        if kind == "superpose":
            return infer.superpose(vals[0], vals[1])
        if kind == "expect":
            return infer.expectation(vals[0])
        if kind == "prob":
            return infer.prob_cmp(vals[0], node.const["cmp"], node.const["rhs"])
        raise ValueError(f"unknown node kind {kind!r}")

    def forward(self) -> None:
        """Recompute every node from the current leaf logits.

        Replaying with unchanged leaves reproduces all values bit-for-bit.
        """
        for node in self.nodes:
            node.value = self._compute(node)


def _seed_cotangent(node: Node) -> np.ndarray:
    x: ProbInt = node.tape.nodes[node.parents[0]].value
    if node.kind == "expect":
        return x.support().astype(np.float64)
    cmp = infer.COMPARATORS[node.const["cmp"]]
    return cmp(x.support(), node.const["rhs"]).astype(np.float64)


def _backprop(node: Node, g: np.ndarray, cot: dict[int, np.ndarray]) -> None:
    tape = node.tape
    kind = node.kind

    def send(idx: int, contribution: np.ndarray):
        if idx in cot:
            cot[idx] = cot[idx] + contribution
        else:
            cot[idx] = contribution

    if kind == "add_rv":
        a = tape.nodes[node.parents[0]].value
        b = tape.nodes[node.parents[1]].value
        pa = np.exp(a.log_mass)
        pb = np.exp(b.log_mass)
        full = _correlate(g, pb)
        send(node.parents[0], full[pb.size - 1 : pb.size - 1 + pa.size])
        full = _correlate(g, pa)
        send(node.parents[1], full[pa.size - 1 : pa.size - 1 + pb.size])
    elif kind == "add_const":
        send(node.parents[0], g)
    elif kind == "negate":
        send(node.parents[0], g[::-1])
    elif kind == "collapse":
        parent = tape.nodes[node.parents[0]].value
        send(node.parents[0], np.full(parent.dim, g[0]))
    elif kind == "scale":
        send(node.parents[0], g[:: node.const["k"]])
    elif kind == "div":
        parent = tape.nodes[node.parents[0]].value
        k = node.const["k"]
        pad_lo = parent.offset % k
        idx = (np.arange(parent.dim) + pad_lo) // k
        send(node.parents[0], g[idx])
    elif kind == "mod":
        parent = tape.nodes[node.parents[0]].value
        k = node.const["k"]
        pad_lo = parent.offset % k
        idx = (np.arange(parent.dim) + pad_lo) % k
        send(node.parents[0], g[idx])
    elif kind == "mask":
        send(node.parents[0], g * node.const["mask"])
    elif kind == "superpose":
        out: ProbInt = node.value
        for pidx in node.parents:
            part: ProbInt = tape.nodes[pidx].value
            start = part.lo - out.lo
            send(pidx, g[start : start + part.dim])
    else:
        raise ValueError(f"unexpected node kind {kind!r} in backward pass")


def _correlate(g: np.ndarray, other: np.ndarray) -> np.ndarray:
    from .fftconv import linear_conv

    return linear_conv(g, other[::-1])


def grad(query: Node, leaves) -> dict[LeafParam, np.ndarray]:
    """Gradient of a recorded scalar query w.r.t. each leaf's logits."""
    if not query.is_scalar:
        raise NonScalarQuery(f"cannot differentiate node kind {query.kind!r}")
    tape = query.tape
    leaves = list(leaves)
    for param in leaves:
        if param not in tape.leaf_index:
            raise UnrecordedNode("leaf parameter was never recorded on this tape")

    cot: dict[int, np.ndarray] = {query.parents[0]: _seed_cotangent(query)}
    grads = {param: np.zeros_like(param.logits) for param in leaves}

    for idx in range(query.parents[0], -1, -1):
        g = cot.pop(idx, None)
        if g is None:
            continue
        node = tape.nodes[idx]
        if node.kind == "leaf":
            param: LeafParam = node.const["param"]
            if param not in grads:
                continue
            masses = np.exp(node.value.log_mass)
            if param.parametrization == "softmax":
                grads[param] += masses * (g - float(np.dot(g, masses)))
            else:
                grads[param] += g * masses
        else:
            _backprop(node, g, cot)
    return grads


def fd_check(
    query: Node,
    leaves,
    step: float = 1e-5,
    seed: int = 0,
    max_coords: int | None = None,
) -> float:
    """Max relative disagreement between analytic and central-difference grads.

    Perturbs leaf logits coordinate-wise.  When a leaf has more coordinates
    than max_coords, a seeded random subset is checked.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    tape = query.tape
    analytic = grad(query, leaves)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for param in leaves:
        n = param.logits.size
        coords = np.arange(n)
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        for j in coords:
            orig = param.logits[j]
            param.logits[j] = orig + step
            tape.forward()
            f_plus = query.value
            param.logits[j] = orig - step
            tape.forward()
            f_minus = query.value
            param.logits[j] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            err = abs(analytic[param][j] - fd) / max(abs(fd), 1e-8)
            worst = max(worst, err)
    tape.forward()
    return worst


# ---------------------------------------------------------------------------
# gradient-descent demo: learning digit distributions from sum labels

@dataclass
class LearnSumResult:
    leaf_probs: list[np.ndarray]  # softmax probabilities per digit leaf
    loss_trace: list[float]
    final_probs: dict[int, float]  # label -> Pr[sum == label] after training

    def argmax_digits(self) -> list[int]:
        return [int(np.argmax(p)) for p in self.leaf_probs]


def build_sum_tape(leaves: list[LeafParam], digits_per_number: int):
    """Record sum = number1 + number2 where each number is sum_i digit_i*10^i."""
    tape = Tape()
    numbers = []
    for which in range(2):
        acc = None
        for i in range(digits_per_number):
            digit = tape.leaf(leaves[which * digits_per_number + i])
            scaled = tape.mul_const(digit, 10**i)
            acc = scaled if acc is None else tape.add_rv(acc, scaled)
        numbers.append(acc)
    return tape, tape.add_rv(numbers[0], numbers[1])


def learn_sum(
    targets: list[int],
    digits_per_number: int,
    steps: int = 500,
    learning_rate: float = 0.5,
    seed: int = 0,
) -> LearnSumResult:
    """Fit softmax digit leaves by gradient descent on mean -ln Pr[sum = label].

    Logits start at small seeded noise: an exactly uniform start is a saddle
    for labels with several decompositions and descent would stall on it.
    """
    n = digits_per_number
    max_label = 2 * (10**n - 1)
    for label in targets:
        if not 0 <= label <= max_label:
            raise UnreachableLabel(f"label {label} outside reachable range 0..{max_label}")

    rng = np.random.default_rng(seed)
    leaves = [
        LeafParam(0.25 * rng.standard_normal(10), "softmax") for _ in range(2 * n)
    ]
    tape, total = build_sum_tape(leaves, n)
    counts: dict[int, int] = {}
    for label in targets:
        counts[label] = counts.get(label, 0) + 1
    prob_nodes = {label: tape.prob_cmp(total, "==", label) for label in counts}

    trace: list[float] = []

    def mean_nll() -> float:
        return math.fsum(
            -math.log(max(prob_nodes[label].value, 1e-300)) * c
            for label, c in counts.items()
        ) / len(targets)

    for _ in range(steps):
        trace.append(mean_nll())
        updates = {param: np.zeros_like(param.logits) for param in leaves}
        for label, node in prob_nodes.items():
            p = node.value
            g = grad(node, leaves)
            coef = -(counts[label] / len(targets)) / max(p, 1e-300)
            for param in leaves:
                updates[param] += coef * g[param]
        for param in leaves:
            param.logits -= learning_rate * updates[param]
        tape.forward()
    trace.append(mean_nll())

    leaf_probs = [np.exp(param.build().log_mass) for param in leaves]
    final = {label: float(node.value) for label, node in prob_nodes.items()}
    return LearnSumResult(leaf_probs, trace, final)
