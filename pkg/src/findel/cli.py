"""``findel`` command line: run scenario files or check single expressions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ast, marketplace
from .parser import DEFAULT_DELTA, ParseError, parse, pretty_print
from .scenario import DEFAULT_YEAR, ScenarioParseError, parse_scenario, run_scenario


def _nat(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="findel", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario file and evaluate its assertions")
    run.add_argument("scenario", type=Path, help="scenario file, or - for stdin")
    run.add_argument("--delta", type=_nat, default=DEFAULT_DELTA, help="half-width of At windows")
    run.add_argument("--freshness", type=_nat, default=marketplace.DEFAULT_FRESHNESS,
                     help="maximum age of a gateway entry")
    run.add_argument("--year", type=_nat, default=DEFAULT_YEAR, help="time units in 1yr")
    run.add_argument("--format", choices=("text", "json"), default="text")

    chk = sub.add_parser("parse", help="parse a Findel expression and print its canonical form")
    chk.add_argument("expression")
    chk.add_argument("--delta", type=_nat, default=DEFAULT_DELTA)
    return ap


def _run(args: argparse.Namespace) -> int:
    text = sys.stdin.read() if str(args.scenario) == "-" else args.scenario.read_text()
    try:
        lines = parse_scenario(text)
    except ScenarioParseError as exc:
        print(f"{args.scenario}:{exc.line}:{exc.column}: {exc.message}", file=sys.stderr)
        return 2
    report = run_scenario(lines, delta=args.delta, freshness_window=args.freshness, year_length=args.year)
    if args.format == "json":
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(report.to_text())
    return 0 if report.verdict == "pass" else 1


def _parse(args: argparse.Namespace) -> int:
    try:
        p = parse(args.expression, args.delta)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(pretty_print(p))
    problems = ast.validate(p)
    for v in problems:
        print(f"invalid: {v}", file=sys.stderr)
    return 1 if problems else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    return _parse(args)


if __name__ == "__main__":
    sys.exit(main())
