"""Flat YAML experiment files.

Every key maps onto a field of :class:`ExperimentSpec`, :class:`OptimizerConfig`
or one of their nested configs::

    sweep: power          # or "antennas"
    power_db: [5, 10, 15, 20]
    modes: [planar, upa]
    replications: 10
    iterations: 500
    D: 0.5
    rician_K: 1.0

Missing keys take their defaults.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import yaml

from .channel import ScatteringConfig
from .cssca import OptimizerConfig, StepSchedule
from .experiments import DEFAULT_ANTENNA_COUNTS, DEFAULT_POWER_DB, ExperimentSpec
from .solvers import BarrierSolverConfig

__all__ = ["ConfigError", "load_config", "spec_from_mapping", "with_overrides"]


class ConfigError(ValueError):
    """Unreadable or invalid experiment file."""


def _float(v):
    if isinstance(v, bool):
        raise TypeError("expected a number")
    return float(v)


def _int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise TypeError("expected an integer")
    return int(v)


def _opt_float(v):
    return None if v is None else _float(v)


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _list(conv):
    def f(v):
        if not isinstance(v, list):
            v = [v]
        return tuple(conv(x) for x in v)
    return f


_OPTIMIZER_KEYS = {
    "N": _int, "M": _int, "D": _float, "X": _float, "P": _float, "sigma2": _float,
    "iterations": _int, "seed": _int, "tau_t": _float, "tau_r": _float, "tau_Q": _opt_float,
    "tau_g": _float, "tau_h": _float, "region_size": _opt_float, "early_stop": _opt_float,
    "stationarity_window": _int, "init_layout": _str,
}
_SCHEDULE_KEYS = {"rho_exponent": _float, "gamma_exponent": _float, "gamma_scale": _float}
_SCATTERING_KEYS = {"rician_K": _float, "paths_per_cluster": _int}
_BARRIER_KEYS = {
    "epsilon": _float, "max_newton_steps": _int,
    "initial_barrier_weight": _float, "barrier_decrease_factor": _float,
}
_SPEC_KEYS = {
    "sweep": _str, "power_db": _list(_float), "antenna_counts": _list(_int),
    "modes": _list(_str), "replications": _int, "output": _str, "samples": _int,
    "antenna_snr_db": _float, "record_wall_time": _bool, "workers": _int,
}
# a single "mode" restricts the sweep to one movement mode
_ALIASES = {"mode": "modes", "output_path": "output"}

KNOWN_KEYS = (set(_OPTIMIZER_KEYS) | set(_SCHEDULE_KEYS) | set(_SCATTERING_KEYS)
              | set(_BARRIER_KEYS) | set(_SPEC_KEYS) | set(_ALIASES))


def _convert(raw: dict) -> dict:
    out = {}
    tables = (_OPTIMIZER_KEYS, _SCHEDULE_KEYS, _SCATTERING_KEYS, _BARRIER_KEYS, _SPEC_KEYS)
    for key, value in raw.items():
        if not isinstance(key, str) or key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        name = _ALIASES.get(key, key)
        conv = next(t[name] for t in tables if name in t)
        try:
            out[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {key!r}: {exc} (got {value!r})") from None
    return out


def _pick(values: dict, table: dict) -> dict:
    return {k: v for k, v in values.items() if k in table}


def spec_from_mapping(raw: dict | None) -> ExperimentSpec:
    """Validated :class:`ExperimentSpec` from a flat key-value mapping."""
    values = _convert(raw or {})
    sweep = values.pop("sweep", None)
    if sweep is None:
        sweep = "antennas" if "antenna_counts" in values and "power_db" not in values else "power"
    if sweep not in ("power", "antennas"):
        raise ConfigError(f"field 'sweep': must be 'power' or 'antennas' (got {sweep!r})")
    if sweep == "power":
        if "antenna_counts" in values:
            raise ConfigError("field 'antenna_counts' does not apply to a power sweep")
        values.setdefault("power_db", DEFAULT_POWER_DB)
    else:
        if "power_db" in values:
            raise ConfigError("field 'power_db' does not apply to an antenna sweep")
        values.setdefault("antenna_counts", DEFAULT_ANTENNA_COUNTS)

    try:
        schedule = StepSchedule(**_pick(values, _SCHEDULE_KEYS))
        scattering = ScatteringConfig(**_pick(values, _SCATTERING_KEYS))
        barrier = BarrierSolverConfig(**_pick(values, _BARRIER_KEYS))
        base = OptimizerConfig(schedule=schedule, scattering=scattering, barrier=barrier,
                               **_pick(values, _OPTIMIZER_KEYS))
        spec_kw = _pick(values, _SPEC_KEYS)
        if "output" in spec_kw:
            spec_kw["output_path"] = Path(spec_kw.pop("output"))
        return ExperimentSpec(base=base, **spec_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentSpec:
    """Parse and validate an experiment file; an empty file yields all defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark is not None else "unknown position"
        msg = f"{path}: parse error at {where}: {getattr(exc, 'problem', None) or exc}"
        ctx = getattr(exc, "context_mark", None)
        if ctx is not None and (mark is None or ctx.line != mark.line):
            msg += f" ({getattr(exc, 'context', None) or 'construct'} opened at line {ctx.line + 1})"
        raise ConfigError(msg) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected key: value pairs at the top level")
    return spec_from_mapping(raw)


def with_overrides(spec: ExperimentSpec, **changes) -> ExperimentSpec:
    """Copy of ``spec`` with base-config fields (``iterations``, ``seed``...) or ExperimentSpec fields replaced."""
    base_kw = {k: v for k, v in changes.items() if k in _OPTIMIZER_KEYS}
    spec_kw = {k: v for k, v in changes.items() if k not in _OPTIMIZER_KEYS}
    base = replace(spec.base, **base_kw) if base_kw else spec.base
    return replace(spec, base=base, **spec_kw)
