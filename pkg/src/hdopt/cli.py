"""Command-line front end: optimize, simulate, check, compare.

Exit codes are part of the contract and scripts are expected to branch on
them:

* 0: success
* 1: input error (unreadable file, parse error, unknown benchmark or knob)
* 2: the optimizer proved the targets infeasible within the dimension cap
* 3: internal invariant failure

Every run derives all randomness from ``--seed``, so repeated invocations
with the same arguments produce the same numbers (wall-time columns aside).
``HEIM_THREADS`` caps simulation workers exactly as it does for the library
entry points.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from hdopt.indcheck import (
    Code,
    DegenerateTupleError,
    check_independent_product,
    check_independent_set,
)
from hdopt.optimizer import DimensionalConstraintError, optimize
from hdopt.simharness import (
    BENCHMARKS,
    TrialConfig,
    compare_thresholds,
    report,
    run_benchmark,
)
from hdopt.speclang import Expr, Prod, Ref, SpecError, Sum, parse_hw_model, parse_infix, parse_spec

__all__ = ["main", "BPC_RATES"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_INTERNAL = 3

# Cell-level bit error rates for the multi-bit-per-cell storage configurations
# the benchmarks model: 1 bit per cell stores binary exactly, the denser
# packings pay for capacity with raw bit errors.
BPC_RATES = {1: 0.0, 2: 0.0215, 3: 0.1273}

# Benchmark size knobs exposed as flags.  Names match the knob keys with
# dashes; validation of which knob belongs to which benchmark stays in
# TrialConfig so the CLI and library reject exactly the same configs.
_KNOB_FLAGS = (
    "codebook-lo",
    "codebook-hi",
    "elements-lo",
    "elements-hi",
    "keys",
    "vals",
    "pairs",
    "query-lo",
    "query-hi",
    "records-lo",
    "records-hi",
    "vertices",
    "concepts",
    "relations",
    "interactions",
    "degree-lo",
    "degree-hi",
    "alphabet",
    "base-len",
)


class _CliError(Exception):
    """Bad input detected by the CLI itself (not by a library call)."""


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def _knobs_from_args(args: argparse.Namespace) -> dict[str, int]:
    knobs: dict[str, int] = {}
    for flag in _KNOB_FLAGS:
        attr = flag.replace("-", "_")
        value = getattr(args, attr, None)
        if value is not None:
            knobs[attr] = value
    if getattr(args, "qs_len", None) is not None:
        knobs["query_hi"] = args.qs_len
    return knobs


def _inject_p(args: argparse.Namespace) -> float:
    if args.inject_p is not None:
        return args.inject_p
    if args.bpc is not None:
        return BPC_RATES[args.bpc]
    return 0.0


def _benchmark_from_args(args: argparse.Namespace) -> str:
    positional = args.benchmark
    flagged = args.benchmark_flag
    if positional and flagged and positional != flagged:
        raise _CliError(
            f"benchmark given twice with different values: {positional!r} and {flagged!r}"
        )
    name = positional or flagged
    if name is None:
        raise _CliError("no benchmark named; pass one positionally or with --benchmark")
    return name


def _config_from_args(args: argparse.Namespace) -> TrialConfig:
    return TrialConfig(
        benchmark=_benchmark_from_args(args),
        instances=args.instances,
        trials=args.trials,
        seed=args.seed,
        inject_p=_inject_p(args),
        knobs=_knobs_from_args(args),
    )


def cmd_optimize(args: argparse.Namespace) -> int:
    spec = parse_spec(_read_text(args.spec))
    hw = parse_hw_model(_read_text(args.hw)) if args.hw else None
    result = optimize(hw, spec, max_n=args.max_n)
    payload = {
        "n_opt": result.n_opt,
        "queries": [
            {
                "id": q.id,
                "n": q.n,
                "threshold": round(q.threshold, 6),
                "fp": q.fp,
                "fn": q.fn,
                "acc": q.acc,
                "independence": q.independence,
            }
            for q in result.queries
        ],
    }
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    result = run_benchmark(cfg)
    csv_text, summary = report([result])
    if args.out is not None:
        _emit(csv_text, args.out + ".csv")
        _emit(json.dumps(summary, indent=2), args.out + ".json")
    elif args.format == "json":
        _emit(json.dumps(summary, indent=2), None)
    else:
        _emit(csv_text, None)
    return EXIT_OK


def _tuples_of(node: Expr) -> list[tuple[Code, ...]]:
    """Flatten an expression into a set of code tuples.

    Sums union their terms, products bind codes into one tuple.  A sum nested
    inside a product term has no tuple-set reading; the caller is told to
    rewrite it as a product of sums.
    """
    if isinstance(node, Ref):
        return [((node.name, 0),)]
    if isinstance(node, Prod):
        codes: list[Code] = []
        stack = list(node.factors)
        while stack:
            f = stack.pop(0)
            if isinstance(f, Ref):
                codes.append((f.name, 0))
            elif isinstance(f, Prod):
                stack = list(f.factors) + stack
            else:
                raise SpecError(
                    "a sum inside a bound tuple has no set reading; "
                    "write a product of sums instead"
                )
        return [tuple(codes)]
    if isinstance(node, Sum):
        out: list[tuple[Code, ...]] = []
        for term in node.terms:
            out.extend(_tuples_of(term))
        return out
    raise SpecError(f"unsupported expression node {type(node).__name__}")


def expr_independent(e: Expr) -> bool:
    """Decide independence for one parsed query expression.

    A product whose factors contain sums is checked as a product of tuple
    sets; anything else flattens to a single tuple set.  A tuple that cancels
    to nothing is the all-zero row, which is linearly dependent by
    definition.
    """
    try:
        if isinstance(e, Prod) and any(isinstance(f, Sum) for f in e.factors):
            return check_independent_product([_tuples_of(f) for f in e.factors])
        return check_independent_set(_tuples_of(e))
    except DegenerateTupleError:
        return False


def cmd_check(args: argparse.Namespace) -> int:
    text = _read_text(args.file)
    all_independent = True
    lines_out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            verdict = expr_independent(parse_infix(line))
        except SpecError as exc:
            raise SpecError(f"{args.file}:{lineno}: {exc}") from exc
        all_independent &= verdict
        lines_out.append(f"{'independent' if verdict else 'dependent'}\t{line}")
    _emit("\n".join(lines_out), args.out)
    return EXIT_OK if all_independent else EXIT_INPUT


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    row = compare_thresholds(cfg, n_fixed=args.n_fixed, grid=args.grid)
    if args.format == "json":
        _emit(json.dumps(row, indent=2), args.out)
    else:
        cols = (
            "benchmark",
            "n",
            "grid",
            "instances",
            "trials",
            "static_accuracy",
            "tuned_accuracy",
            "tuned_threshold",
            "optimize_ms",
            "tune_ms",
            "time_ratio",
        )
        header = ",".join(cols)
        values = ",".join(str(row[c]) for c in cols)
        _emit(header + "\n" + values, args.out)
    return EXIT_OK


def _add_sim_flags(p: argparse.ArgumentParser, instances: int, trials: int) -> None:
    p.add_argument("benchmark", nargs="?", choices=BENCHMARKS, help="benchmark to run")
    p.add_argument(
        "--benchmark",
        dest="benchmark_flag",
        choices=BENCHMARKS,
        help="benchmark to run (same as the positional form)",
    )
    p.add_argument("--instances", type=int, default=instances)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument(
        "--bpc",
        type=int,
        choices=sorted(BPC_RATES),
        help="storage density; sets the modeled cell error rate",
    )
    noise.add_argument(
        "--inject-p", type=float, help="raw bit-flip rate, overrides --bpc"
    )
    p.add_argument("--out", help="output path (simulate writes .csv and .json)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument(
        "--qs-len", type=int, help="longest query string (alias for --query-hi)"
    )
    for flag in _KNOB_FLAGS:
        p.add_argument(f"--{flag}", type=int, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdopt",
        description="Optimize, simulate and verify binary HD query programs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="optimize a query spec for a hardware model")
    p_opt.add_argument("--spec", required=True, help="query spec file")
    p_opt.add_argument("--hw", help="hardware model file (omit for error-free hardware)")
    p_opt.add_argument("--max-n", type=int, default=100_000)
    p_opt.add_argument("--out", help="write JSON here instead of stdout")
    p_opt.set_defaults(fn=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="optimize a benchmark and simulate it")
    _add_sim_flags(p_sim, instances=100, trials=100)
    p_sim.set_defaults(fn=cmd_simulate)

    p_chk = sub.add_parser("check", help="check query expressions for independence")
    p_chk.add_argument("file", help="file with one infix expression per line")
    p_chk.add_argument("--out", help="write verdicts here instead of stdout")
    p_chk.set_defaults(fn=cmd_check)

    p_cmp = sub.add_parser(
        "compare", help="static thresholds versus the tuned-threshold baseline"
    )
    _add_sim_flags(p_cmp, instances=20, trials=10)
    p_cmp.add_argument("--n-fixed", type=int, default=10_000)
    p_cmp.add_argument("--grid", type=int, default=1000)
    p_cmp.set_defaults(fn=cmd_compare)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract reserves 2 for
        # infeasible optimizations, so usage problems map to input errors.
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        return args.fn(args)
    except DimensionalConstraintError as exc:
        # Must precede the ValueError arm: infeasibility is a subtype of it.
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (_CliError, SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - contract maps the rest to code 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
