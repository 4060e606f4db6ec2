"""Command-line entry point: ``unisplit solve`` and ``unisplit suite``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..problems.catalog import PRESETS
from ..problems.config import ConfigError
from ..solvers import ShiftConfig, SolverConfig, parse_algorithm, solve
from .suite import SuiteSpec, resolve_problem, run_suite
from .tables import dump_residuals, render_table

log = logging.getLogger("unisplit")

EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unisplit", description="Split-preconditioned iterative solvers.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one problem")
    s.add_argument("--problem", required=True,
                   help=f"JSON problem file or preset name ({', '.join(sorted(PRESETS))})")
    s.add_argument("--algorithm", required=True, help="fp, gmres or bicgstab (or e.g. gmres20, fp0.9)")
    s.add_argument("--restart", type=int, help="GMRES restart length (default 20)")
    s.add_argument("--alpha", type=float, help="fixed-point step size")
    s.add_argument("--precond", choices=["none", "universal", "shift"], default="universal")
    s.add_argument("--gamma", type=float, default=1.0, help="shift for the shift-splitting preconditioner")
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--max-iter", type=int, default=30000)
    s.add_argument("--single", action="store_true", help="iterate in single precision")
    s.add_argument("--residuals", help="write the residual history to this file")
    s.add_argument("--report", help="write the solver report as JSON to this file")

    t = sub.add_parser("suite", help="run a benchmark suite")
    t.add_argument("--spec", required=True, help="JSON suite description")
    t.add_argument("--out", help="output file (default: stdout)")
    t.add_argument("--format", choices=["markdown", "csv"], help="default: from --out suffix, else markdown")
    t.add_argument("--reports", help="write all cell reports as JSON to this file")
    return p


def _cmd_solve(args) -> int:
    try:
        base_dir = os.getcwd()
        split = resolve_problem(args.problem, base_dir, single=args.single)
        config = SolverConfig(tol=args.tol, max_iter=args.max_iter, alpha=args.alpha, restart=args.restart)
        parse_algorithm(args.algorithm, config)
        shift = ShiftConfig(gamma=args.gamma) if args.precond == "shift" else None
    except (ConfigError, ValueError, OSError) as err:
        print(f"unisplit: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    _, report = solve(split, args.algorithm, precond=args.precond, config=config, shift=shift)
    print(f"{split.name}: {report.algorithm} {report.status} after {report.iterations} iterations, "
          f"{report.operator_evals} evaluations, residual {report.final_residual:.3g}")
    if args.residuals:
        dump_residuals(report, args.residuals)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    return 0


def _cmd_suite(args) -> int:
    try:
        spec = SuiteSpec.from_json(args.spec)
    except (ConfigError, ValueError, OSError) as err:
        print(f"unisplit: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = args.format or ("csv" if (args.out or "").endswith(".csv") else "markdown")

    def progress(key, report):
        log.info("%s / %s / %s: %s (%d evaluations, %.2fs)", *key, report.status, report.operator_evals,
                 report.wall_time)

    result = run_suite(spec, on_cell=progress)
    text = render_table(result, fmt)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.reports:
        with open(args.reports, "w") as fh:
            json.dump([{"problem": k[0], "algorithm": k[1], "preconditioner": k[2], **r.to_dict()}
                       for k, r in result.cells.items()], fh, indent=1)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "solve":
        return _cmd_solve(args)
    return _cmd_suite(args)


if __name__ == "__main__":
    sys.exit(main())
