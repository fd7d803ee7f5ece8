"""Command line: ``treeaug gen | solve | batch | verify``.

Exit codes: 0 success, 1 bad input or a solution that fails verification,
2 infeasible instance, 3 size bound exceeded, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Any

from treeaug.config import LIMITS, limits_override
from treeaug.errors import (
    InfeasibleError,
    InputError,
    InvariantViolation,
    SizeLimitError,
    TapError,
)
from treeaug.generate import KINDS, generate
from treeaug.instance import is_feasible, to_fraction
from treeaug.pipeline import (
    MODES,
    dumps_instance,
    load_instance,
    read_manifest,
    report_csv,
    run_batch,
    run_pipeline,
    summarize,
    summary_csv,
)

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SIZE, EXIT_INVARIANT = 0, 1, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InfeasibleError):
        return EXIT_INFEASIBLE
    if isinstance(exc, SizeLimitError):
        return EXIT_SIZE
    if isinstance(exc, InvariantViolation):
        return EXIT_INVARIANT
    return EXIT_INPUT


def _param(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    for cast in (int, float):
        try:
            return key, cast(value)
        except ValueError:
            pass
    return key, value


def _delta(text: str) -> Fraction:
    try:
        d = to_fraction(text)
    except (InputError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad delta {text!r}") from exc
    if d < 1:
        raise argparse.ArgumentTypeError("delta must be at least 1")
    return d


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with other input errors; 2 means infeasible
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="treeaug", description=__doc__.splitlines()[0])
    limits = _Parser(add_help=False)
    limits.add_argument("--exact-max-n", type=int, help=f"brute-force size bound ({LIMITS.exact_max_n})")
    limits.add_argument("--cg-max-n", type=int, help=f"CG separation size bound ({LIMITS.cg_max_n})")
    limits.add_argument(
        "--lambda-max-width", type=int, help=f"largest width for Λ enumeration ({LIMITS.lambda_max_width})"
    )
    limits.add_argument(
        "--oracle-bound", type=int, help=f"compute OPT by brute force up to this n ({LIMITS.oracle_max_n})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a generated instance as JSON")
    gen.add_argument("kind", choices=KINDS)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--param", "-p", type=_param, action="append", default=[], metavar="KEY=VALUE")
    gen.add_argument("--delta", type=_delta, help="random link costs in [1, delta]")
    gen.add_argument("-o", "--output", help="file to write (default: stdout)")

    solve = sub.add_parser("solve", parents=[limits], help="solve one instance file")
    solve.add_argument("instance")
    solve.add_argument("--k", type=int, default=2)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--mode", choices=MODES, default="auto")
    solve.add_argument("--delta", type=_delta, help="reject instances whose cost ratio exceeds this")
    solve.add_argument("--out", choices=("json", "csv"), default="json")
    solve.add_argument("--no-lp", action="store_true", help="skip the cut-LP and CG-LP values")

    batch = sub.add_parser("batch", parents=[limits], help="run a manifest of instances")
    batch.add_argument("manifest")
    batch.add_argument("--jsonl", help="report stream path (default: stdout)")
    batch.add_argument("--csv", help="per-family summary CSV path")
    batch.add_argument("--out", choices=("json", "csv"), default="json", help="stdout format")
    batch.add_argument("--workers", type=int, help="process count (default: $TREEAUG_WORKERS or 1)")

    verify = sub.add_parser("verify", help="check that a link set covers every tree edge")
    verify.add_argument("instance")
    verify.add_argument("solution", help="JSON list of [u, v] pairs, or a solve report")
    return parser


def _limit_changes(args: argparse.Namespace) -> dict[str, int]:
    out = {}
    for flag, key in (
        ("exact_max_n", "exact_max_n"),
        ("cg_max_n", "cg_max_n"),
        ("lambda_max_width", "lambda_max_width"),
        ("oracle_bound", "oracle_max_n"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_gen(args: argparse.Namespace) -> int:
    params = dict(args.param)
    if args.delta is not None:
        params["delta"] = args.delta
    inst = generate(args.kind, params, args.seed)
    _write(args.output, dumps_instance(inst) + "\n")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    if args.delta is not None and inst.links:
        ratio = max(inst.costs) / min(inst.costs)
        if ratio > args.delta:
            raise InputError(f"cost ratio {ratio} exceeds --delta {args.delta}")
    name = os.path.splitext(os.path.basename(args.instance))[0]
    try:
        rep = run_pipeline(inst, args.k, args.mode, args.seed, instance_id=name, lp_values=not args.no_lp)
    except TapError as exc:
        partial = getattr(exc, "report", None)
        if partial is not None:
            sys.stdout.write(partial.dumps() + "\n")
        raise
    if args.out == "csv":
        sys.stdout.write(report_csv([rep.to_json()]))
    else:
        sys.stdout.write(rep.dumps() + "\n")
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    entries = read_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    reports = run_batch(entries, base_dir=base, workers=args.workers)
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in reports)
    if args.jsonl:
        _write(args.jsonl, lines)
    rows = summarize(reports)
    if args.csv:
        _write(args.csv, summary_csv(rows))
    if not args.jsonl:
        _write(None, report_csv(reports) if args.out == "csv" else lines)
    return EXIT_OK


def _read_solution(path: str) -> list[tuple[int, int]]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read solution {path}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("solution")
    if not isinstance(data, list):
        raise InputError("solution must be a list of [u, v] pairs")
    try:
        return [(int(p[0]), int(p[1])) for p in data]
    except (TypeError, ValueError, IndexError) as exc:
        raise InputError(f"bad solution entry: {exc}") from exc


def cmd_verify(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    pairs = _read_solution(args.solution)
    ids = []
    for u, v in pairs:
        try:
            ids.append(inst.link_id(u, v))
        except (KeyError, InputError) as exc:
            raise InputError(f"({u}, {v}) is not a link of the instance") from exc
    ok = is_feasible(inst, ids)
    out = {"feasible": ok, "size": len(set(ids)), "cost": str(inst.cost_of(set(ids)))}
    sys.stdout.write(json.dumps(out, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_INPUT


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "batch": cmd_batch, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with limits_override(**_limit_changes(args)):
            return COMMANDS[args.command](args)
    except TapError as exc:
        sys.stderr.write(f"treeaug: {type(exc).__name__}: {exc}\n")
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
