"""Command-line front end.

Exit codes: 0 success, 2 configuration error (bad flags or config text),
3 runtime error (simulation or I/O failure).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from photon_holes.experiments import Mode, Scenario, ScenarioError, run_scenario
from photon_holes.fileio import (
    ConfigError,
    config_from_values,
    export_histogram,
    read_config_values,
    scan_text,
    summary_text,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PANELS = [s.value for s in (Scenario.FIG3A, Scenario.FIG3B, Scenario.FIG3C, Scenario.FIG3D)]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--pulses", type=int, help="number of pulses (overrides n_pulses)")
    p.add_argument("--seed", type=int, help="64-bit seed (overrides seed)")
    p.add_argument("--exact", action="store_true", help="exact probabilities instead of Monte Carlo")
    p.add_argument("--out", type=Path,
                   help="output file; the summary goes next to it with suffix .summary.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photon-holes",
                                     description="Simulate photon holes made by quantum interference.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one panel scenario and write its histogram")
    _common(run)
    run.add_argument("--scenario", choices=[s.value for s in Scenario])

    scan = sub.add_parser("scan-phase", help="coincidence probability versus relative phase")
    _common(scan)
    scan.add_argument("--points", type=int, default=16)

    bell = sub.add_parser("bell", help="CHSH value behind two unbalanced interferometers")
    _common(bell)
    bell.add_argument("--delay-pulses", type=int)
    bell.add_argument("--phase-a", type=float, help="local phase A in degrees")
    bell.add_argument("--phase-b", type=float, help="local phase B in degrees")

    tpa = sub.add_parser("tpa-compare", help="compare two-photon absorption with interference")
    _common(tpa)
    return parser


def _values(args) -> dict:
    values = read_config_values(args.config.read_text()) if args.config else {}
    if args.pulses is not None:
        values["n_pulses"] = args.pulses
    if args.seed is not None:
        values["seed"] = args.seed
    if args.exact:
        values["mode"] = Mode.EXACT
    cmd = args.command
    if cmd == "run":
        if args.scenario is not None:
            values["scenario"] = Scenario(args.scenario)
    elif cmd == "scan-phase":
        values["scenario"] = Scenario.PHASE_SCAN
    elif cmd == "bell":
        values["scenario"] = Scenario.BELL
        if args.delay_pulses is not None:
            values["delay_pulses"] = args.delay_pulses
        if args.phase_a is not None:
            values["phase_a_deg"] = args.phase_a
        if args.phase_b is not None:
            values["phase_b_deg"] = args.phase_b
    else:
        values["scenario"] = Scenario.TPA_COMPARE
    return values


def _summary_path(out: Path) -> Path:
    return out.with_name(out.stem + ".summary.txt")


def _emit(args, result) -> None:
    text = summary_text(result)
    if args.out is None:
        sys.stdout.write(text)
        return
    if args.command == "run" and result.histogram is not None:
        export_histogram(result.histogram, args.out)
    elif args.command == "scan-phase":
        args.out.write_text(scan_text(result.extra["scan"]))
    else:
        args.out.write_text(text)
        return
    _summary_path(args.out).write_text(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_values(_values(args))
        if args.command == "run" and cfg.scenario.value not in PANELS:
            raise ConfigError(f"'run' handles the panels {PANELS}; use the dedicated subcommand",
                              key="scenario")
        if args.command == "scan-phase":
            if args.points < 3:
                raise ConfigError("--points must be at least 3")
            cfg = replace(cfg, scan_points=args.points)
    except (ConfigError, ScenarioError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_scenario(cfg)
        _emit(args, result)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
