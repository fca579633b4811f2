"""Power and antenna-count sweeps, the UPA baseline, and CSV output.

Every mode at a given (sweep value, replicate) runs with the same seed, so it
sees the same scattering draws during optimization and the same evaluation
draws afterwards. Mode comparisons are therefore paired.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cssca import MODES, OptimizerConfig, evaluate, run

__all__ = [
    "CSV_HEADER",
    "ExperimentSpec",
    "ResultRow",
    "db_to_power",
    "run_power_sweep",
    "run_antenna_sweep",
    "run_experiment",
    "emit_csv",
    "parse_csv",
    "summarize",
    "pooled_se",
]

CSV_HEADER = ("mode", "sweep_value", "replicate", "final_rate", "rate_stderr",
              "wall_time_seconds", "iterations_used")

DEFAULT_POWER_DB = (5.0, 10.0, 15.0, 20.0)
DEFAULT_ANTENNA_COUNTS = (1, 2, 4, 6)


def db_to_power(db: float, sigma2: float = 1.0) -> float:
    """Transmit power giving an SNR of ``db`` decibels over noise power ``sigma2``."""
    return sigma2 * 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep over ``power_db`` or ``antenna_counts``; the power sweep is the default."""

    power_db: tuple[float, ...] | None = None
    antenna_counts: tuple[int, ...] | None = None
    modes: tuple[str, ...] = MODES
    replications: int = 10
    base: OptimizerConfig = field(default_factory=OptimizerConfig)
    output_path: Path | None = None
    samples: int = 500
    # SNR held fixed while the antenna count varies
    antenna_snr_db: float = 20.0
    record_wall_time: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.power_db is not None and self.antenna_counts is not None:
            raise ValueError("give only one of power_db or antenna_counts")
        if self.power_db is None and self.antenna_counts is None:
            object.__setattr__(self, "power_db", DEFAULT_POWER_DB)
        if self.power_db is not None:
            object.__setattr__(self, "power_db", tuple(float(v) for v in self.power_db))
            if not self.power_db:
                raise ValueError("power_db sweep is empty")
        if self.antenna_counts is not None:
            counts = tuple(int(v) for v in self.antenna_counts)
            if not counts:
                raise ValueError("antenna_counts sweep is empty")
            if any(c < 1 for c in counts):
                raise ValueError("antenna_counts must be positive integers")
            object.__setattr__(self, "antenna_counts", counts)
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("modes must be nonempty")
        bad = [m for m in modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}; choose from {MODES}")
        object.__setattr__(self, "modes", modes)
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.samples < 2:
            raise ValueError("samples must be at least 2")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.output_path is not None:
            object.__setattr__(self, "output_path", Path(self.output_path))

    @property
    def sweep(self) -> str:
        return "power" if self.power_db is not None else "antennas"

    @property
    def values(self) -> tuple:
        return self.power_db if self.power_db is not None else self.antenna_counts


@dataclass(frozen=True)
class ResultRow:
    mode: str
    sweep_value: float
    replicate: int
    final_rate: float
    rate_stderr: float
    wall_time_seconds: float
    iterations_used: int

    def __post_init__(self):
        if not self.final_rate >= 0:
            raise ValueError("final_rate must be nonnegative")
        if not self.rate_stderr >= 0:
            raise ValueError("rate_stderr must be nonnegative")

    def sort_key(self):
        return (self.mode, self.sweep_value, self.replicate)


def _point_config(spec: ExperimentSpec, mode: str, value, replicate: int) -> OptimizerConfig:
    base = spec.base
    seed = base.seed + replicate
    if spec.sweep == "power":
        return replace(base, mode=mode, P=db_to_power(value, base.sigma2), seed=seed)
    return replace(base, mode=mode, N=value, M=value, P=db_to_power(spec.antenna_snr_db, base.sigma2),
                   seed=seed)


def _run_point(args) -> ResultRow:
    spec, mode, value, replicate = args
    cfg = _point_config(spec, mode, value, replicate)
    start = time.perf_counter()
    result = run(cfg)
    elapsed = time.perf_counter() - start
    rate, se = evaluate(result, spec.samples)
    return ResultRow(mode, float(value), replicate, rate, se,
                     elapsed if spec.record_wall_time else 0.0, result.iterations_used)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run every (mode, sweep value, replicate) point, sorted; writes the CSV if an output path is set."""
    jobs = [(spec, m, v, k) for m in spec.modes for v in spec.values for k in range(spec.replications)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    rows.sort(key=ResultRow.sort_key)
    if spec.output_path is not None:
        emit_csv(rows, spec.output_path)
    return rows


def run_power_sweep(spec: ExperimentSpec) -> list[ResultRow]:
    if spec.sweep != "power":
        raise ValueError("run_power_sweep needs an ExperimentSpec with power_db set")
    return run_experiment(spec)


def run_antenna_sweep(spec: ExperimentSpec) -> list[ResultRow]:
    if spec.sweep != "antennas":
        raise ValueError("run_antenna_sweep needs an ExperimentSpec with antenna_counts set")
    return run_experiment(spec)


# ---------------------------------------------------------------------------
# CSV


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def _write_rows(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=ResultRow.sort_key):
        w.writerow([r.mode, _fmt(r.sweep_value), r.replicate, _fmt(r.final_rate),
                    _fmt(r.rate_stderr), _fmt(r.wall_time_seconds), r.iterations_used])


def emit_csv(rows, path) -> None:
    """Write ``rows`` sorted by (mode, sweep_value, replicate) with 17 significant digits.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        _write_rows(rows, fh)


def parse_csv(path) -> list[ResultRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}")
        return [
            ResultRow(m, float(v), int(k), float(rate), float(se), float(wt), int(it))
            for m, v, k, rate, se, wt, it in reader
        ]


# ---------------------------------------------------------------------------
# summaries


def summarize(rows) -> dict[tuple[str, float], tuple[float, float]]:
    """(mode, sweep_value) -> (mean rate over replicates, standard error of that mean).

    With several replicates the error is the spread across replicates; with
    one it falls back to that run's Monte-Carlo error.
    """
    groups: dict[tuple[str, float], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.mode, r.sweep_value), []).append(r)
    out = {}
    for key, grp in groups.items():
        rates = np.array([r.final_rate for r in grp])
        if len(grp) > 1:
            se = float(np.std(rates, ddof=1) / math.sqrt(len(grp)))
        else:
            se = grp[0].rate_stderr
        out[key] = (float(rates.mean()), se)
    return out


def pooled_se(se_a: float, se_b: float) -> float:
    """Standard error of the difference of two means."""
    return math.hypot(se_a, se_b)
