"""``orules`` command line: check, trace and run scenarios.

Exit codes: 0 success, 2 usage or scenario errors, 3 runtime errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import harness
from .engine import with_dt
from .errors import OrulesError, ScenarioError
from .scenario import FIXTURES, Scenario, fixture_text, parse_scenario

EXIT_OK, EXIT_SCENARIO, EXIT_RUNTIME = 0, 2, 3


@dataclass(frozen=True)
class CliConfig:
    command: str
    scenario_path: str
    runs: int = 1
    seed: int = 0
    dt_override: Optional[float] = None
    strict_orule1: bool = False
    prune: bool = True
    trace_out: Optional[str] = None
    stats_out: Optional[str] = None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orules",
        description="Stochastic state-reduction simulator for the Schrodinger-cat scenarios.",
        epilog="Scenario paths that do not exist may name a shipped fixture: "
               + ", ".join(FIXTURES) + ". ORULES_WORKERS sets the worker count.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,trace,check}")

    def common(p, runs: bool):
        p.add_argument("scenario_path", help="scenario file (.scn) or fixture name")
        if runs:
            p.add_argument("--runs", type=_positive_int, default=1, help="number of trajectories (>= 1)")
        p.add_argument("--seed", type=int, default=0, help="seed of the first trajectory")
        p.add_argument("--dt", dest="dt_override", type=_positive_float,
                       help="step length; must divide the bin time")
        p.add_argument("--strict-orule1", dest="strict_orule1", action="store_true",
                       help="sample every component receiving current, discarding non-ready hits")
        p.add_argument("--no-prune", dest="prune", action="store_false",
                       help="keep phantom components instead of dropping them")
        p.add_argument("--trace-out", metavar="PATH", help="write the event trace here")
        if runs:
            p.add_argument("--stats-out", metavar="PATH", help="write ensemble statistics here")

    common(sub.add_parser("run", help="run a seeded ensemble"), runs=True)
    common(sub.add_parser("trace", help="run one trajectory and print its full log"), runs=False)
    check = sub.add_parser("check", help="parse and validate a scenario")
    check.add_argument("scenario_path", help="scenario file (.scn) or fixture name")
    return parser


def parse_config(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(ns).items() if v is not None}
    return CliConfig(**fields)


def load(path: str) -> Scenario:
    """Parse a scenario file, falling back to a shipped fixture name."""
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return parse_scenario(fh.read())
    stem = os.path.basename(path)
    stem = stem[:-4] if stem.endswith(".scn") else stem
    if os.sep not in path and stem in FIXTURES:
        return parse_scenario(fixture_text(stem))
    raise FileNotFoundError(f"no such scenario file: {path}")


def _execute(cfg: CliConfig, out) -> int:
    sc = load(cfg.scenario_path)
    if cfg.dt_override is not None:
        sc = with_dt(sc, cfg.dt_override)
    if cfg.command == "check":
        p = sc.params
        out.write(f"{cfg.scenario_path}: ok ({sc.version.value}, dt={p.dt!r}, "
                  f"{len(sc.events)} events)\n")
        return EXIT_OK
    if cfg.command == "trace":
        rec = harness.run_trajectory(sc, cfg.seed, prune=cfg.prune, strict=cfg.strict_orule1)
        text = harness.format_trace(rec)
        if cfg.trace_out:
            harness.write_text(cfg.trace_out, text)
        else:
            out.write(text)
        return EXIT_OK
    records = harness.run_records(sc, cfg.runs, cfg.seed, prune=cfg.prune, strict=cfg.strict_orule1)
    st = harness.summarize(sc, records, cfg.seed)
    text = harness.format_stats(st)
    if cfg.stats_out:
        harness.write_text(cfg.stats_out, text)
    if cfg.trace_out:
        harness.write_text(cfg.trace_out, harness.format_traces(records))
    out.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_SCENARIO
    err = sys.stderr
    try:
        return _execute(cfg, sys.stdout)
    except ScenarioError as e:
        err.write(f"{cfg.scenario_path}:{e}\n")
        return EXIT_SCENARIO
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as e:
        err.write(f"orules: {e}\n")
        return EXIT_SCENARIO
    except (OrulesError, OSError, ValueError) as e:
        err.write(f"orules: {type(e).__name__}: {e}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
