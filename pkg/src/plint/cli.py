"""Command-line interface: program evaluation, benchmarks, checks, demos.

Exit codes: 0 success, 1 usage or parse error, 2 engine error,
3 tolerance violation (so CI can gate on exit codes alone).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff, checks, infer, lang, programs
from .errors import CsvWriteError, PlintError, SourceError
from .fftconv import warm_up_naive
from .ops import add_rv
from .pmf import from_probs, uniform

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ENGINE = 2
EXIT_TOLERANCE = 3

NAIVE_BITWIDTH_CAP = 14
SUDOKU_ORACLE_TOL = 1e-9
ENCODING_TOL = 1e-6

CSV_HEADER = "suite,query_kind,size,trial,engine,wall_seconds,mass_error"


@dataclass
class BenchRecord:
    """One timing measurement row."""

    suite: str
    query_kind: str
    size: int
    trial: int
    engine: str
    wall_seconds: float
    mass_error: float

    def csv_row(self) -> str:
        return (
            f"{self.suite},{self.query_kind},{self.size},{self.trial},"
            f"{self.engine},{self.wall_seconds!r},{self.mass_error!r}"
        )


@dataclass
class AddBenchConfig:
    bitwidth_min: int
    bitwidth_max: int
    trials: int
    engines: tuple[str, ...]
    query: str  # expect | lt | eq
    seed: int
    threads: int = 1


@dataclass
class LuhnBenchConfig:
    length_min: int
    length_max: int
    step: int
    trials: int
    seed: int
    threads: int = 1


def write_records(records: list[BenchRecord], path: str | None) -> None:
    lines = [CSV_HEADER] + [r.csv_row() for r in records]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise CsvWriteError(f"cannot write {path}: {e}") from e


def _run_query(total, query: str) -> float:
    if query == "expect":
        return infer.expectation(total)
    if query == "lt":
        return infer.prob_cmp(total, "<", 0)
    return infer.prob_cmp(total, "==", 0)


def _add_trial(cfg: AddBenchConfig, bitwidth: int, engine: str, trial: int) -> BenchRecord:
    rng = np.random.default_rng([cfg.seed, bitwidth, trial])
    n = 1 << bitwidth
    probs1 = np.exp(rng.standard_normal(n))
    probs1 /= probs1.sum()
    probs2 = np.exp(rng.standard_normal(n))
    probs2 /= probs2.sum()

    start = time.perf_counter()
    x1 = from_probs(probs1, 0)
    x2 = from_probs(probs2, 0)
    total = add_rv(x1, x2, engine=engine)
    _run_query(total, cfg.query)
    wall = time.perf_counter() - start

    mass_error = abs(float(np.exp(total.log_mass).sum()) - 1.0)
    return BenchRecord("add", cfg.query, bitwidth, trial, engine, wall, mass_error)


def run_add_bench(cfg: AddBenchConfig) -> list[BenchRecord]:
    """Time E/Pr queries on X1+X2 with random normalized PMFs per bitwidth.

    The timed region covers ProbInt construction, the convolution and the
    query; drawing the random masses and the one-time JIT warm-up are not
    part of any trial.
    """
    if "naive" in cfg.engines:
        warm_up_naive()
    records: list[BenchRecord] = []
    for bitwidth in range(cfg.bitwidth_min, cfg.bitwidth_max + 1):
        for engine in cfg.engines:
            if engine == "naive" and bitwidth > NAIVE_BITWIDTH_CAP:
                continue
            if cfg.threads > 1:
                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    rows = list(
                        pool.map(
                            lambda t: _add_trial(cfg, bitwidth, engine, t),
                            range(cfg.trials),
                        )
                    )
            else:
                rows = [_add_trial(cfg, bitwidth, engine, t) for t in range(cfg.trials)]
            records.extend(rows)
    return records


def _luhn_trial(length: int, trial: int) -> BenchRecord:
    start = time.perf_counter()
    digits = [uniform(0, 9) for _ in range(length)]
    check = programs.luhn_check_dist(digits)
    infer.prob_cmp(check, "==", 0)
    wall = time.perf_counter() - start
    mass_error = abs(check.total_mass() - 1.0)
    return BenchRecord("luhn", "valid", length, trial, "fft", wall, mass_error)


def run_luhn_bench(cfg: LuhnBenchConfig) -> list[BenchRecord]:
    records: list[BenchRecord] = []
    for length in range(cfg.length_min, cfg.length_max + 1, cfg.step):
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                rows = list(
                    pool.map(lambda t: _luhn_trial(length, t), range(cfg.trials))
                )
        else:
            rows = [_luhn_trial(length, t) for t in range(cfg.trials)]
        records.extend(rows)
    return records


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_eval(args) -> int:
    try:
        source = Path(args.file).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        program = lang.parse(source)
    except SourceError as e:
        print(f"{args.file}:{e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        results = lang.evaluate(program, strict=args.strict)
    except SourceError as e:
        print(f"{args.file}:{e}", file=sys.stderr)
        return EXIT_ENGINE
    except PlintError as e:
        print(f"{args.file}: {e}", file=sys.stderr)
        return EXIT_ENGINE
    if args.json:
        payload = []
        for r in results:
            if r.kind == "pmf":
                payload.append(
                    {"query": r.text, "kind": r.kind, "offset": r.offset, "masses": r.masses}
                )
            else:
                payload.append({"query": r.text, "kind": r.kind, "value": r.value})
        print(json.dumps(payload, indent=2))
    else:
        for r in results:
            print(f"{r.text} = {r.format_value()}")
    return EXIT_OK


def cmd_bench_add(args) -> int:
    engines = tuple(e.strip() for e in args.engines.split(",") if e.strip())
    cfg = AddBenchConfig(
        bitwidth_min=args.bitwidth_min,
        bitwidth_max=args.bitwidth_max,
        trials=args.trials,
        engines=engines,
        query=args.query,
        seed=args.seed,
        threads=args.threads,
    )
    records = run_add_bench(cfg)
    write_records(records, args.csv)
    return EXIT_OK


def cmd_bench_luhn(args) -> int:
    cfg = LuhnBenchConfig(
        length_min=args.length_min,
        length_max=args.length_max,
        step=args.step,
        trials=args.trials,
        seed=args.seed,
        threads=args.threads,
    )
    records = run_luhn_bench(cfg)
    write_records(records, args.csv)
    return EXIT_OK


def cmd_check(args) -> int:
    run_oracle = args.oracle or not (args.oracle or args.grad)
    run_grad = args.grad or not (args.oracle or args.grad)
    ok = True
    if run_oracle:
        report = checks.run_oracle_suite(args.trials, args.seed, args.max_dim)
        print(report.summary())
        for failure in report.failures:
            print(f"  {failure}")
        ok = ok and report.passed
    if run_grad:
        report = checks.run_grad_suite(args.trials, args.seed)
        print(report.summary())
        for failure in report.failures:
            print(f"  {failure}")
        ok = ok and report.passed
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_demo_learn_sum(args) -> int:
    rng = np.random.default_rng(args.seed)
    hidden = rng.integers(0, 10, size=(2, args.digits))
    numbers = [sum(int(d) * 10**i for i, d in enumerate(row)) for row in hidden]
    label = numbers[0] + numbers[1]
    print(f"hidden digits: {hidden.tolist()}  label: {label}")

    result = autodiff.learn_sum(
        [label], args.digits, steps=args.steps, learning_rate=args.lr, seed=args.seed
    )
    if not all(math.isfinite(loss) for loss in result.loss_trace):
        print("training diverged (non-finite loss)", file=sys.stderr)
        return EXIT_TOLERANCE
    learned = result.argmax_digits()
    truth = [int(d) for d in hidden[0]] + [int(d) for d in hidden[1]]
    print(f"final Pr[sum == {label}] = {result.final_probs[label]:.6f}")
    print(f"argmax digits: {learned}  recovered: {learned == truth}")

    digit_pints = [from_probs(p, 0) for p in result.leaf_probs]
    d1, d2 = digit_pints[: args.digits], digit_pints[args.digits :]
    direct = infer.expectation(programs.digit_sum_direct(d1, d2))
    carry = programs.carry_sum_expectation(d1, d2)
    print(f"E[sum] direct encoding = {direct:.9f}, carry encoding = {carry:.9f}")
    if args.csv:
        lines = ["step,loss"] + [
            f"{i},{loss!r}" for i, loss in enumerate(result.loss_trace)
        ]
        Path(args.csv).write_text("\n".join(lines) + "\n")
    if abs(direct - carry) > ENCODING_TOL:
        print("encoding mismatch exceeds tolerance", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_sudoku(args) -> int:
    rng = np.random.default_rng(args.seed)
    cells = programs.random_cells(args.grid, rng)
    unit_probs = programs.sudoku_constraint_probs(cells)
    total = 0.0
    for probs in unit_probs:
        for p in probs:
            total += math.log(p) if p > 0.0 else -math.inf
    n_constraints = sum(len(p) for p in unit_probs)
    print(
        f"grid {args.grid}: {n_constraints} constraints, "
        f"total log-probability = {total:.6f}"
    )
    if args.grid == 4:
        worst = 0.0
        units = programs.sudoku_units(4)
        for unit, probs in zip(units, unit_probs):
            for value, engine_p in enumerate(probs):
                oracle_p = programs.sudoku_constraint_oracle(cells, unit, value)
                worst = max(worst, abs(engine_p - oracle_p))
        print(f"oracle cross-check: max abs error {worst:.3g}")
        if worst > SUDOKU_ORACLE_TOL:
            return EXIT_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="plint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a program file")
    p_eval.add_argument("file")
    p_eval.add_argument("--strict", action="store_true",
                        help="require declared pints to be normalized")
    p_eval.add_argument("--json", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="run timing benchmarks")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_add = bench_sub.add_parser("add", help="scaling of X1+X2 queries with bitwidth")
    p_add.add_argument("--bitwidth-min", type=int, default=4)
    p_add.add_argument("--bitwidth-max", type=int, default=14)
    p_add.add_argument("--trials", type=int, default=3)
    p_add.add_argument("--engines", default="fft,naive")
    p_add.add_argument("--query", choices=("expect", "lt", "eq"), default="eq")
    p_add.add_argument("--csv", default=None)
    p_add.add_argument("--seed", type=int, default=42)
    p_add.add_argument("--threads", type=int, default=1)
    p_add.set_defaults(func=cmd_bench_add)

    p_luhn = bench_sub.add_parser("luhn", help="scaling of the Luhn check with length")
    p_luhn.add_argument("--length-min", type=int, default=50)
    p_luhn.add_argument("--length-max", type=int, default=350)
    p_luhn.add_argument("--step", type=int, default=50)
    p_luhn.add_argument("--trials", type=int, default=3)
    p_luhn.add_argument("--csv", default=None)
    p_luhn.add_argument("--seed", type=int, default=42)
    p_luhn.add_argument("--threads", type=int, default=1)
    p_luhn.set_defaults(func=cmd_bench_luhn)

    p_check = sub.add_parser("check", help="randomized agreement suites")
    p_check.add_argument("--oracle", action="store_true")
    p_check.add_argument("--grad", action="store_true")
    p_check.add_argument("--trials", type=int, default=200)
    p_check.add_argument("--seed", type=int, default=42)
    p_check.add_argument("--max-dim", type=int, default=64)
    p_check.set_defaults(func=cmd_check)

    p_demo = sub.add_parser("demo", help="demos")
    demo_sub = p_demo.add_subparsers(dest="demo_command", required=True)
    p_learn = demo_sub.add_parser("learn-sum", help="learn digit PMFs from sum labels")
    p_learn.add_argument("--digits", type=int, default=1)
    p_learn.add_argument("--steps", type=int, default=500)
    p_learn.add_argument("--lr", type=float, default=0.5)
    p_learn.add_argument("--seed", type=int, default=42)
    p_learn.add_argument("--csv", default=None)
    p_learn.set_defaults(func=cmd_demo_learn_sum)

    p_sudoku = sub.add_parser("sudoku", help="row/column constraint probabilities")
    p_sudoku.add_argument("--grid", type=int, choices=(4, 9), default=4)
    p_sudoku.add_argument("--seed", type=int, default=42)
    p_sudoku.set_defaults(func=cmd_sudoku)

    return parser


def _validate(args) -> str | None:
    if getattr(args, "seed", 0) < 0:
        return "seed must be nonnegative"
    if getattr(args, "bench_command", None) == "add":
        if not 1 <= args.bitwidth_min <= args.bitwidth_max:
            return "need 1 <= bitwidth-min <= bitwidth-max"
        engines = [e.strip() for e in args.engines.split(",") if e.strip()]
        if not engines or any(e not in ("fft", "naive") for e in engines):
            return "engines must be a comma list drawn from: fft, naive"
        if "naive" in engines and args.bitwidth_max > NAIVE_BITWIDTH_CAP:
            return f"naive engine is capped at bitwidth {NAIVE_BITWIDTH_CAP}"
        if args.trials < 1:
            return "trials must be >= 1"
    if getattr(args, "bench_command", None) == "luhn":
        if not 1 <= args.length_min <= args.length_max:
            return "need 1 <= length-min <= length-max"
        if args.step < 1 or args.trials < 1:
            return "step and trials must be >= 1"
    if getattr(args, "demo_command", None) == "learn-sum":
        if args.digits < 1:
            return "digits must be >= 1"
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    problem = _validate(args)
    if problem is not None:
        print(f"plint: error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except PlintError as e:
        print(f"plint: error: {e}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
