"""Movable-antenna MIMO: joint antenna placement and transmit covariance design
from channel statistics, by stochastic successive convex approximation."""

from .channel import (
    AntennaLayout,
    ChannelRealization,
    Cluster,
    PathSet,
    Region,
    ScatteringConfig,
    sample_spreading,
    steering_vector,
    synthesize_channel,
)
from .config import load_config
from .cssca import MODES, OptimizerConfig, StepSchedule, evaluate, initialize_layout, run
from .experiments import ExperimentSpec, ResultRow, emit_csv, run_antenna_sweep, run_power_sweep
from .rate import CovarianceMatrix, achievable_rate, average_rate
from .solvers import BarrierSolverConfig, solve_covariance

__all__ = [
    "AntennaLayout",
    "BarrierSolverConfig",
    "ChannelRealization",
    "Cluster",
    "CovarianceMatrix",
    "ExperimentSpec",
    "MODES",
    "OptimizerConfig",
    "PathSet",
    "Region",
    "ResultRow",
    "ScatteringConfig",
    "StepSchedule",
    "achievable_rate",
    "average_rate",
    "emit_csv",
    "evaluate",
    "initialize_layout",
    "load_config",
    "run",
    "run_antenna_sweep",
    "run_power_sweep",
    "sample_spreading",
    "solve_covariance",
    "steering_vector",
    "synthesize_channel",
]

__version__ = "0.1.0"
