"""``eqfslam run``: run a scenario file and write CSV, SVG and a JSON snapshot."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from eqfslam.config import ConfigError, dump_config, load_config, shipped_config
from eqfslam.selfcheck import run_selfcheck
from eqfslam.sim import SimulationError, export_chart, export_csv, export_snapshot, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64
OUTPUT_ENV = "EQFSLAM_OUTPUT_DIR"

log = logging.getLogger("eqfslam")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqfslam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--config", help="scenario file (default: the shipped paper.cfg)")
    run.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./results)")
    run.add_argument("--seed", type=int, help="override rng.seed")
    run.add_argument("--duration", type=float, help="override scenario.duration [s]")
    run.add_argument("--dt", type=float, help="override scenario.dt [s]")
    run.add_argument("--chart", dest="chart", action="store_true", default=True, help="write lyapunov.svg (default)")
    run.add_argument("--no-chart", dest="chart", action="store_false")
    run.add_argument("--selfcheck", action="store_true", help="run the invariant audit and exit")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(arg):
    if arg is None:
        return shipped_config()
    path = Path(arg)
    if not path.exists() and path.name == arg:
        shipped = shipped_config(arg)
        if shipped.exists():
            return shipped
    return path


def _selfcheck() -> int:
    results = run_selfcheck()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: residual {r.residual:.3e} (tol {r.tolerance:.0e})")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")

    if args.selfcheck:
        return _selfcheck()

    try:
        config = load_config(_resolve_config(args.config))
        overrides = {k: v for k, v in (("seed", args.seed), ("duration", args.duration), ("dt", args.dt))
                     if v is not None}
        config = replace(config, **overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or os.environ.get(OUTPUT_ENV, "results"))
    log.debug("resolved config:\n%s", dump_config(config))
    try:
        record = run_experiment(config)
    except SimulationError as exc:
        print(f"numerical failure at {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(dump_config(config), encoding="utf-8")
    export_csv(record, out / "run.csv")
    export_snapshot(record, out / "run.json")
    if args.chart:
        export_chart(record, out / "lyapunov.svg")
    ratio = record.lyapunov[-1] / record.lyapunov[0]
    log.info("%d steps, n=%d; l_i(T)/l_i(0) = %s", len(record.t) - 1, record.n,
             ", ".join(f"{r:.3e}" for r in ratio))
    log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
