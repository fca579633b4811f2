"""Command-line entry point: run a sweep and write the results CSV."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, load_config, with_overrides
from .cssca import MODES
from .experiments import (
    DEFAULT_ANTENNA_COUNTS,
    DEFAULT_POWER_DB,
    ExperimentSpec,
    emit_csv,
    run_experiment,
    summarize,
)

DESK_ITERATIONS = 500
FULL_ITERATIONS = 2000


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ma-cssca",
        description="Movable-antenna MIMO rate optimization sweeps (statistical CSI, CSSCA).",
    )
    p.add_argument("--config", help="flat YAML experiment file")
    p.add_argument("--mode", choices=MODES, help="run a single movement mode")
    p.add_argument("--sweep", choices=("power", "antennas"), help="sweep transmit SNR or antenna count")
    p.add_argument("--iterations", type=int, help="CSSCA iterations per run")
    p.add_argument("--full", action="store_true",
                   help=f"use the full {FULL_ITERATIONS}-iteration budget "
                        f"(default without a config file: {DESK_ITERATIONS})")
    p.add_argument("--samples", type=int, help="Monte-Carlo samples for the final rate")
    p.add_argument("--seed", type=int, help="base seed; replicate k uses seed + k")
    p.add_argument("--replications", type=int, help="independent replicates per point")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--output", help="CSV path (default: standard output)")
    p.add_argument("--no-wall-time", action="store_true",
                   help="write 0 for wall time so repeated runs give identical files")
    p.add_argument("--quiet", action="store_true", help="skip the summary table")
    return p


def _resolve_spec(args) -> ExperimentSpec:
    if args.config:
        spec = load_config(args.config)
    else:
        spec = ExperimentSpec()
        spec = with_overrides(spec, iterations=DESK_ITERATIONS)
    if args.full:
        spec = with_overrides(spec, iterations=FULL_ITERATIONS)
    if args.sweep == "power" and spec.sweep != "power":
        spec = replace(spec, antenna_counts=None, power_db=DEFAULT_POWER_DB)
    elif args.sweep == "antennas" and spec.sweep != "antennas":
        spec = replace(spec, power_db=None, antenna_counts=DEFAULT_ANTENNA_COUNTS)
    changes = {}
    if args.mode:
        changes["modes"] = (args.mode,)
    for name in ("iterations", "seed", "samples", "replications", "workers"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.output:
        changes["output_path"] = args.output
    if args.no_wall_time:
        changes["record_wall_time"] = False
    return with_overrides(spec, **changes)


def _print_summary(spec: ExperimentSpec, rows, stream) -> None:
    table = summarize(rows)
    label = "SNR dB" if spec.sweep == "power" else "N = M"
    print(f"{label:>8} " + " ".join(f"{m:>16}" for m in spec.modes), file=stream)
    for v in spec.values:
        cells = []
        for m in spec.modes:
            mean, se = table[(m, float(v))]
            cells.append(f"{mean:8.4f} +- {se:.4f}")
        print(f"{v:>8g} " + " ".join(f"{c:>16}" for c in cells), file=stream)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _resolve_spec(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        rows = run_experiment(spec)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if spec.output_path is None:
        emit_csv(rows, sys.stdout)
    if not args.quiet:
        _print_summary(spec, rows, sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
