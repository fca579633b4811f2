"""Stochastic successive convex approximation loop over positions and covariance.

One iteration draws a fresh path set, linearizes the rate at the current
point, folds the linearization into the running surrogates, solves the
convex subproblems and moves a diminishing step ``gamma`` toward their
solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .channel import (
    OPTIMIZATION_STREAM,
    EVALUATION_STREAM,
    AntennaLayout,
    Region,
    ScatteringConfig,
    path_rng,
    sample_spreading,
    synthesize_channel,
)
from .rate import average_rate_stats, rate_sample
from .solvers import (
    BarrierSolverConfig,
    solve_covariance,
    solve_feasibility,
    solve_positions_boxed,
    solve_positions_general,
)
from .surrogate import (
    SurrogateState,
    pairwise_constraints,
    update_matrix_surrogate,
    update_quadratic_surrogate,
)

__all__ = [
    "MODES",
    "StepSchedule",
    "OptimizerConfig",
    "IterationState",
    "TrajectoryRecord",
    "RunResult",
    "step_sizes",
    "grid_shape",
    "build_regions",
    "grid_in_region",
    "initialize_layout",
    "run",
    "evaluate",
    "stationarity_residual",
]

MODES = ("general", "linear", "planar", "upa")
HALF_WAVELENGTH = 0.5
INIT_LAYOUTS = ("baseline", "center")


@dataclass(frozen=True)
class StepSchedule:
    """``rho = (1+t)^-rho_exponent``, ``gamma = gamma_scale*(1+t)^-gamma_exponent``."""

    rho_exponent: float = 0.7
    gamma_exponent: float = 0.9
    gamma_scale: float = 1.0

    def __post_init__(self):
        for name in ("rho_exponent", "gamma_exponent"):
            v = getattr(self, name)
            if not 0.5 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0.5, 1] for the step sums to diverge "
                                 f"while their squares converge, got {v}")
        if not self.gamma_exponent > self.rho_exponent:
            raise ValueError("gamma_exponent must exceed rho_exponent so that gamma/rho -> 0")
        if not 0.0 < self.gamma_scale <= 1.0:
            raise ValueError("gamma_scale must lie in (0, 1]")


def step_sizes(iteration: int, sched: StepSchedule = StepSchedule()) -> tuple[float, float]:
    if iteration < 0:
        raise ValueError("iteration index must be nonnegative")
    base = 1.0 + iteration
    return base ** -sched.rho_exponent, sched.gamma_scale * base ** -sched.gamma_exponent


@dataclass(frozen=True)
class OptimizerConfig:
    mode: str = "general"
    N: int = 4
    M: int = 4
    D: float = 0.5
    X: float = 1.0
    P: float = 10.0
    sigma2: float = 1.0
    iterations: int = 2000
    schedule: StepSchedule = StepSchedule()
    tau_t: float = -1.0
    tau_r: float = -1.0
    # None -> -1/max(P, 1): curvature matched to the power scale of Q
    tau_Q: float | None = None
    tau_g: float = -1.0
    tau_h: float = -1.0
    scattering: ScatteringConfig = ScatteringConfig()
    seed: int = 0
    barrier: BarrierSolverConfig = BarrierSolverConfig()
    # side of a square general-mode region; None derives it from the planar boxes
    region_size: float | None = None
    early_stop: float | None = None
    stationarity_window: int = 100
    # "baseline": start linear/planar antennas at the UPA points (clamped into
    # their boxes); "center": start at the box centers
    init_layout: str = "baseline"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.N < 1 or self.M < 1:
            raise ValueError("antenna counts N and M must be at least 1")
        if not self.D >= HALF_WAVELENGTH:
            raise ValueError(f"D = {self.D} violates the half-wavelength rule: "
                             "minimum antenna spacing must be at least 0.5 wavelengths")
        if not self.X > 0:
            raise ValueError("X (movement range) must be positive")
        if not self.P >= 0:
            raise ValueError("power budget P must be nonnegative")
        if not self.sigma2 > 0:
            raise ValueError("noise power sigma2 must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        for name in ("tau_t", "tau_r", "tau_Q", "tau_g", "tau_h"):
            value = getattr(self, name)
            if value is not None and not value < 0:
                raise ValueError(f"{name} must be negative")
        if self.region_size is not None and not self.region_size > 0:
            raise ValueError("region_size must be positive")
        if self.init_layout not in INIT_LAYOUTS:
            raise ValueError(f"init_layout must be one of {INIT_LAYOUTS}, got {self.init_layout!r}")
        if self.stationarity_window < 1:
            raise ValueError("stationarity_window must be at least 1")
        if self.scattering.rng_seed != self.seed:
            object.__setattr__(self, "scattering", replace(self.scattering, rng_seed=self.seed))

    @property
    def covariance_curvature(self) -> float:
        """Effective ``tau_Q``."""
        return self.tau_Q if self.tau_Q is not None else -1.0 / max(self.P, 1.0)


# ---------------------------------------------------------------------------
# layouts


def grid_shape(n: int) -> tuple[int, int]:
    """(rows, cols) of the closest-to-square grid holding ``n`` antennas."""
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def _grid_points(n: int, rows: int, cols: int, pitch_x: float, pitch_y: float) -> np.ndarray:
    rc = [(k // cols, k % cols) for k in range(n)]
    pts = np.array([[c * pitch_x, r * pitch_y] for r, c in rc], dtype=float)
    offset = np.array([(cols - 1) * pitch_x, (rows - 1) * pitch_y]) / 2.0
    return pts - offset


def build_regions(mode: str, n: int, D: float, X: float) -> list[Region]:
    """Per-antenna regions of a movement mode, centered on the origin.

    Linear and planar boxes sit on a closest-to-square grid with gap ``D``
    between neighbouring boxes; linear segments have length ``X`` and rows
    ``D`` apart. The general region is the bounding box of the planar boxes,
    and a UPA antenna's region is its own fixed grid point.
    """
    rows, cols = grid_shape(n)
    if mode == "planar":
        centers = _grid_points(n, rows, cols, X + D, X + D)
        return [Region("planar", c - X / 2, c + X / 2) for c in centers]
    if mode == "linear":
        centers = _grid_points(n, rows, cols, X + D, D)
        return [Region("linear", (c[0] - X / 2, c[1]), (c[0] + X / 2, c[1])) for c in centers]
    if mode == "general":
        w = cols * X + (cols - 1) * D
        h = rows * X + (rows - 1) * D
        return [Region("general", (-w / 2, -h / 2), (w / 2, h / 2))] * n
    if mode == "upa":
        pts = _grid_points(n, rows, cols, D, D)
        return [Region("planar", p, p) for p in pts]
    raise ValueError(f"unknown mode {mode!r}")


def grid_in_region(n: int, region: Region, D: float) -> np.ndarray:
    """``n`` points on a ``D``-spaced grid centered in ``region``, strictly inside it."""
    w, h = region.size
    cap_x = max(math.ceil(w / D), 1) if w > 0 else 1
    cap_y = max(math.ceil(h / D), 1) if h > 0 else 1
    if n > cap_x * cap_y:
        raise ValueError(f"region {w:g} x {h:g} cannot host {n} antennas at spacing {D:g} "
                         f"(room for {cap_x * cap_y})")
    rows, cols = grid_shape(n)
    if cols > cap_x or rows > cap_y:
        cols = min(cap_x, n)
        rows = math.ceil(n / cols)
        if rows > cap_y:
            rows = min(cap_y, n)
            cols = math.ceil(n / rows)
    return _grid_points(n, rows, cols, D, D) + region.center


def _side_layout(cfg: OptimizerConfig, n: int) -> AntennaLayout:
    if cfg.mode == "general" and cfg.region_size is not None:
        s = cfg.region_size / 2
        regions = [Region("general", (-s, -s), (s, s))] * n
    else:
        regions = build_regions(cfg.mode, n, cfg.D, cfg.X)
    if cfg.mode == "general":
        pos = grid_in_region(n, regions[0], cfg.D)
    elif cfg.init_layout == "baseline" and cfg.mode != "upa":
        upa = np.array([r.center for r in build_regions("upa", n, cfg.D, cfg.X)])
        lo = np.array([r.lower for r in regions])
        hi = np.array([r.upper for r in regions])
        pos = np.clip(upa, lo, hi)
    else:
        pos = np.array([r.center for r in regions])
    return AntennaLayout(pos, regions)


def initialize_layout(cfg: OptimizerConfig) -> tuple[AntennaLayout, AntennaLayout]:
    """Starting (transmit, receive) layouts for ``cfg.mode``."""
    return _side_layout(cfg, cfg.N), _side_layout(cfg, cfg.M)


# ---------------------------------------------------------------------------
# driver


@dataclass
class TrajectoryRecord:
    iteration: int
    sampled_rate: float
    alpha: float
    rho: float
    gamma: float
    constraint_violation: bool
    feasible_phase: bool
    step_norm: float
    position_step: float
    candidate_min_distance_t: float
    candidate_min_distance_r: float


@dataclass
class IterationState:
    t_positions: AntennaLayout
    r_positions: AntennaLayout
    Q: np.ndarray
    iteration: int = 0
    objective_trace: list[float] = field(default_factory=list)
    feasibility_flags: list[bool] = field(default_factory=list)


@dataclass
class RunResult:
    state: IterationState
    trajectory: list[TrajectoryRecord]
    deployed_t: AntennaLayout
    deployed_r: AntennaLayout
    config: OptimizerConfig

    @property
    def Q(self) -> np.ndarray:
        return self.state.Q

    @property
    def iterations_used(self) -> int:
        return self.state.iteration


def stationarity_residual(result, last_k: int) -> float:
    """Mean of ``gamma * ||(t_bar, r_bar, Q_bar) - (t, r, Q)||`` over the last ``last_k`` iterations."""
    traj = result.trajectory if isinstance(result, RunResult) else result
    if last_k < 1:
        raise ValueError("last_k must be at least 1")
    if len(traj) < last_k:
        raise ValueError(f"only {len(traj)} iterations recorded, need {last_k}")
    return float(np.mean([rec.step_norm for rec in traj[-last_k:]]))


def run(cfg: OptimizerConfig, initial: tuple[AntennaLayout, AntennaLayout] | None = None,
        Q0=None, callback: Callable[[IterationState, AntennaLayout, AntennaLayout], None] | None = None
        ) -> RunResult:
    """Run the optimizer for ``cfg.iterations`` steps (or until early stop).

    ``callback(state, t_bar, r_bar)`` is called after every iteration with the
    updated state and that iteration's subproblem solutions.
    """
    t_lay, r_lay = initial if initial is not None else initialize_layout(cfg)
    if len(t_lay) != cfg.N or len(r_lay) != cfg.M:
        raise ValueError(f"layout sizes ({len(t_lay)}, {len(r_lay)}) do not match N={cfg.N}, M={cfg.M}")
    if not (t_lay.in_regions(1e-12) and r_lay.in_regions(1e-12)):
        raise ValueError("initial layout lies outside its regions")
    if cfg.mode == "general" and (t_lay.min_distance() < cfg.D - 1e-12 or r_lay.min_distance() < cfg.D - 1e-12):
        raise ValueError("initial layout violates the minimum antenna spacing")
    Q = np.eye(cfg.N, dtype=complex) * (cfg.P / cfg.N) if Q0 is None else np.array(Q0, dtype=complex)

    moving = cfg.mode != "upa"
    surr = SurrogateState.zero(cfg.N, cfg.M)
    state = IterationState(t_lay, r_lay, Q)
    trajectory: list[TrajectoryRecord] = []
    last_ok_t, last_ok_r = t_lay, r_lay

    for it in range(cfg.iterations):
        rho, gamma = step_sizes(it, cfg.schedule)
        ps = sample_spreading(cfg.scattering, path_rng(cfg.seed, OPTIMIZATION_STREAM, it))
        t_pos, r_pos = state.t_positions, state.r_positions
        sample = rate_sample(synthesize_channel(ps, t_pos, r_pos), t_pos, r_pos, state.Q, cfg.sigma2)

        surr.f_Q = update_matrix_surrogate(surr.f_Q, sample.grad_Q, state.Q, rho, cfg.covariance_curvature)
        if moving:
            surr.f_t = update_quadratic_surrogate(surr.f_t, sample.grad_t, t_pos.flat(), rho, cfg.tau_t)
            surr.f_r = update_quadratic_surrogate(surr.f_r, sample.grad_r, r_pos.flat(), rho, cfg.tau_r)

        alpha = np.inf
        feasible = True
        if cfg.mode == "general":
            cons_t = pairwise_constraints(t_pos.positions, cfg.tau_g)
            cons_r = pairwise_constraints(r_pos.positions, cfg.tau_h)
            feas_t = solve_feasibility(cons_t, t_pos.regions[0], cfg.D, cfg.barrier, start=t_pos.positions)
            feas_r = solve_feasibility(cons_r, r_pos.regions[0], cfg.D, cfg.barrier, start=r_pos.positions)
            alpha = min(feas_t.alpha, feas_r.alpha)
            feasible = alpha > 0
            if feasible:
                t_bar = solve_positions_general(surr.f_t, cons_t, t_pos.regions[0], cfg.D, cfg.barrier,
                                                start=feas_t.positions.positions)
                r_bar = solve_positions_general(surr.f_r, cons_r, r_pos.regions[0], cfg.D, cfg.barrier,
                                                start=feas_r.positions.positions)
                Q_bar = solve_covariance(surr.f_Q.a_Q, surr.f_Q.B_Q, cfg.P).Q
                last_ok_t, last_ok_r = t_bar, r_bar
            else:
                t_bar, r_bar, Q_bar = feas_t.positions, feas_r.positions, state.Q
        elif moving:
            t_bar = solve_positions_boxed(surr.f_t, t_pos.regions)
            r_bar = solve_positions_boxed(surr.f_r, r_pos.regions)
            Q_bar = solve_covariance(surr.f_Q.a_Q, surr.f_Q.B_Q, cfg.P).Q
        else:
            t_bar, r_bar = t_pos, r_pos
            Q_bar = solve_covariance(surr.f_Q.a_Q, surr.f_Q.B_Q, cfg.P).Q

        dpos = np.sum((t_bar.positions - t_pos.positions) ** 2) + np.sum((r_bar.positions - r_pos.positions) ** 2)
        dQ = np.sum(np.abs(Q_bar - state.Q) ** 2)
        new_t = t_pos.with_positions((1 - gamma) * t_pos.positions + gamma * t_bar.positions)
        new_r = r_pos.with_positions((1 - gamma) * r_pos.positions + gamma * r_bar.positions)
        new_Q = (1 - gamma) * state.Q + gamma * Q_bar
        new_Q = 0.5 * (new_Q + new_Q.conj().T)

        violation = cfg.mode == "general" and (
            new_t.min_distance() < cfg.D - 1e-9 or new_r.min_distance() < cfg.D - 1e-9
        )
        trajectory.append(TrajectoryRecord(
            iteration=it,
            sampled_rate=sample.value,
            alpha=float(alpha),
            rho=rho,
            gamma=gamma,
            constraint_violation=bool(violation),
            feasible_phase=bool(feasible),
            step_norm=float(gamma * np.sqrt(dpos + dQ)),
            position_step=float(gamma * np.sqrt(dpos)),
            candidate_min_distance_t=t_bar.min_distance(),
            candidate_min_distance_r=r_bar.min_distance(),
        ))
        state.t_positions, state.r_positions, state.Q = new_t, new_r, new_Q
        state.iteration = it + 1
        state.objective_trace.append(sample.value)
        state.feasibility_flags.append(bool(feasible))
        if callback is not None:
            callback(state, t_bar, r_bar)

        if (cfg.early_stop is not None and len(trajectory) >= cfg.stationarity_window
                and stationarity_residual(trajectory, cfg.stationarity_window) < cfg.early_stop):
            break

    deployed_t, deployed_r = state.t_positions, state.r_positions
    if cfg.mode == "general" and (
        deployed_t.min_distance() < cfg.D - 1e-9 or deployed_r.min_distance() < cfg.D - 1e-9
    ):
        deployed_t, deployed_r = last_ok_t, last_ok_r
    return RunResult(state, trajectory, deployed_t, deployed_r, cfg)


def evaluate(result: RunResult, samples: int = 500, stream: int = EVALUATION_STREAM) -> tuple[float, float]:
    """Independent Monte-Carlo (mean, standard error) of the deployed design's rate."""
    cfg = result.config
    return average_rate_stats(result.deployed_t, result.deployed_r, result.Q, cfg.scattering,
                              samples, cfg.sigma2, stream)
