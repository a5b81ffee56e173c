"""plint: exact, differentiable linear arithmetic over bounded integer RVs.

Distributions are offset log-mass vectors; sums of independent variables are
FFT convolutions performed stably in the log domain; constant addition,
negation, constant multiplication, integer division and modulo are index
manipulations; comparisons and branching are exact inference primitives.
Every operation has a recorded adjoint, so scalar queries are differentiable
with respect to the leaf distributions.
"""

from .autodiff import LeafParam, Tape, fd_check, grad, learn_sum
from .errors import PlintError
from .fftconv import fft, log_conv_exp, naive_conv
from .infer import BranchSpec, Condition, branch, expectation, prob_cmp
from .lang import evaluate, parse, pretty_program
from .ops import (
    LinearOpChain,
    add_const,
    add_rv,
    apply_chain,
    div_const,
    mod_const,
    mul_const,
    negate,
)
from .pmf import MassStats, ProbInt, check_normalized, from_probs, mass_at, mass_stats, point, uniform

__version__ = "0.1.0"

__all__ = [
    "BranchSpec",
    "Condition",
    "LeafParam",
    "LinearOpChain",
    "MassStats",
    "PlintError",
    "ProbInt",
    "Tape",
    "add_const",
    "add_rv",
    "apply_chain",
    "branch",
    "check_normalized",
    "div_const",
    "evaluate",
    "expectation",
    "fd_check",
    "fft",
    "from_probs",
    "grad",
    "learn_sum",
    "log_conv_exp",
    "mass_at",
    "mass_stats",
    "mod_const",
    "mul_const",
    "naive_conv",
    "negate",
    "parse",
    "point",
    "pretty_program",
    "prob_cmp",
    "uniform",
]
