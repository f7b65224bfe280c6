"""Command line: one subcommand per task, each driven by a scenario file.

Exit codes: 0 every check passed, 1 a check failed, 2 usage or
configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback

from .errors import ConfigurationError, SolhierError
from .runner import OUT_ENV, TASKS, RunOptions, Scenario, run_scenario

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("solhier")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _lambda_list(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not vals or any(v == 0 for v in vals):
        raise argparse.ArgumentTypeError("lambda probes must be nonzero")
    return vals


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = _Parser(prog="solhier", description="Run scenario checks for loop-algebra soliton hierarchies.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in TASKS + ("run",):
        help_ = "run any scenario" if name == "run" else f"run a {name} scenario"
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", required=True, help="scenario JSON file")
        s.add_argument("--seed", type=_seed, help="override the scenario seed")
        s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./solhier-out)")
        s.add_argument("--lambda-probes", type=_lambda_list, help="comma-separated spectral values")
        s.add_argument("--tolerance-scale", type=_positive, default=1.0,
                       help="multiply every scenario tolerance")
        s.add_argument("--no-write", action="store_true", help="do not write report or CSV files")
        s.add_argument("--json", action="store_true", help="print the report as JSON")
    return p


def _print_report(report, as_json):
    if as_json:
        print(json.dumps(report.to_dict(), indent=2))
        return
    for c in report.checks:
        op = ">=" if c.kind == "min" else "<="
        tag = "PASS" if c.passed else "FAIL"
        if c.kind == "flag":
            print(f"{tag}  {c.name}")
        else:
            print(f"{tag}  {c.name} = {c.value:.3e} ({op} {c.tolerance:.1e})")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}  {report.scenario}: {sum(c.passed for c in report.checks)}/{len(report.checks)} checks")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        scenario = Scenario.load(args.scenario)
        if args.command != "run" and scenario.task != args.command:
            raise ConfigurationError(f"scenario task is {scenario.task!r}, not {args.command!r}")
        opts = RunOptions(seed=args.seed, out=args.out, lambda_probes=args.lambda_probes,
                          tolerance_scale=args.tolerance_scale, write=not args.no_write)
        log.info("running %s (%s)", scenario.name, scenario.task)
        report = run_scenario(scenario, opts)
    except ConfigurationError as exc:
        print(f"solhier: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolhierError as exc:
        print(f"solhier: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    _print_report(report, args.json)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
