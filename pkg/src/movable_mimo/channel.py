"""Far-field clustered-scattering channel between two movable-antenna arrays.

All lengths are in wavelengths, so the carrier wavelength never appears.
A channel realization is the sum of one deterministic line-of-sight path and
a finite set of scattered paths drawn around a few angular clusters::

    H = c0 * a_R(los) a_T(los)^H + sum_l g_l * a_R(l) a_T(l)^H

with ``c0**2 = K/(K+1)`` and ``E sum |g_l|^2 = 1/(K+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Region",
    "AntennaLayout",
    "PathComponent",
    "PathSet",
    "Cluster",
    "ScatteringConfig",
    "ChannelRealization",
    "propagation_delta",
    "steering_vector",
    "steering_matrix",
    "sample_spreading",
    "synthesize_channel",
    "sample_channels",
    "path_rng",
    "as_positions",
    "OPTIMIZATION_STREAM",
    "EVALUATION_STREAM",
]

REGION_KINDS = ("general", "linear", "planar")

# Independent random streams keyed by (seed, stream, index).
OPTIMIZATION_STREAM = 0
EVALUATION_STREAM = 1


def path_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for draw ``index`` of ``stream``; independent of call order."""
    return np.random.default_rng([int(seed), int(stream), int(index)])


@dataclass(frozen=True)
class Region:
    """Axis-aligned feasible area of one antenna (or of a whole array)."""

    kind: str
    lower: tuple[float, float]
    upper: tuple[float, float]

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not all(np.isfinite(lo + hi)):
            raise ValueError("region bounds must be finite")
        if lo[0] > hi[0] or lo[1] > hi[1]:
            raise ValueError(f"region lower bound exceeds upper bound: {lo} > {hi}")
        if self.kind == "linear" and lo[1] != hi[1]:
            raise ValueError("linear region must have a single fixed y coordinate")

    @property
    def size(self) -> tuple[float, float]:
        return (self.upper[0] - self.lower[0], self.upper[1] - self.lower[1])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(
            np.all(p >= np.asarray(self.lower) - tol) and np.all(p <= np.asarray(self.upper) + tol)
        )


@dataclass
class AntennaLayout:
    """Antenna positions, shape ``(n, 2)``, and one feasible region per antenna.

    In the general movement mode every antenna shares the same region.
    """

    positions: np.ndarray
    regions: list[Region]

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 2)
        if len(self.regions) != len(self.positions):
            raise ValueError(
                f"{len(self.positions)} antennas but {len(self.regions)} regions"
            )

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def lower(self) -> np.ndarray:
        return np.array([r.lower for r in self.regions])

    @property
    def upper(self) -> np.ndarray:
        return np.array([r.upper for r in self.regions])

    def flat(self) -> np.ndarray:
        """Interleaved coordinate vector ``(x1, y1, x2, y2, ...)``."""
        return self.positions.reshape(-1).copy()

    def with_positions(self, positions) -> "AntennaLayout":
        return AntennaLayout(np.asarray(positions, dtype=float).reshape(-1, 2), self.regions)

    def in_regions(self, tol: float = 0.0) -> bool:
        return bool(
            np.all(self.positions >= self.lower - tol) and np.all(self.positions <= self.upper + tol)
        )

    def min_distance(self) -> float:
        """Smallest pairwise distance; ``inf`` for a single antenna."""
        n = len(self)
        if n < 2:
            return np.inf
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        return float(np.min(dist[np.triu_indices(n, 1)]))


def propagation_delta(p, theta, phi):
    """Path-length difference between position ``p`` and the origin along (theta, phi)."""
    p = np.asarray(p, dtype=float)
    return p[..., 0] * np.sin(theta) * np.cos(phi) + p[..., 1] * np.cos(theta)


def steering_matrix(positions, theta, phi) -> np.ndarray:
    """Steering vectors for many directions at once, shape ``(n_antennas, n_paths)``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    ux = np.sin(theta) * np.cos(phi)
    uy = np.cos(theta)
    rho = np.outer(pos[:, 0], ux) + np.outer(pos[:, 1], uy)
    return np.exp(-2j * np.pi * rho) / np.sqrt(len(pos))


def steering_vector(positions, theta: float, phi: float, side: str = "tx") -> np.ndarray:
    """Unit-norm array response of ``positions`` toward (theta, phi).

    The transmit and receive responses share one formula; ``side`` is
    accepted for readability at call sites.
    """
    if side not in ("tx", "rx"):
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(pos) == 0:
        raise ValueError("steering vector needs at least one antenna position")
    return steering_matrix(pos, theta, phi)[:, 0]


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    theta_T: float
    phi_T: float
    theta_R: float
    phi_R: float


@dataclass
class PathSet:
    """One realization of the spatial spreading function.

    Index 0 of every array is the line-of-sight path; the rest are scattered.
    """

    gains: np.ndarray
    theta_T: np.ndarray
    phi_T: np.ndarray
    theta_R: np.ndarray
    phi_R: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex).ravel()
        for name in ("theta_T", "phi_T", "theta_R", "phi_R"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if arr.shape != self.gains.shape:
                raise ValueError(f"{name} has {arr.size} entries, expected {self.gains.size}")
            if np.any(arr < 0.0) or np.any(arr > np.pi):
                raise ValueError(f"{name} must lie in [0, pi]")
            setattr(self, name, arr)
        if self.gains.size < 1:
            raise ValueError("a path set needs the line-of-sight component")

    def __len__(self) -> int:
        return self.gains.size

    def _component(self, k: int) -> PathComponent:
        return PathComponent(
            complex(self.gains[k]),
            float(self.theta_T[k]),
            float(self.phi_T[k]),
            float(self.theta_R[k]),
            float(self.phi_R[k]),
        )

    @property
    def los(self) -> PathComponent:
        return self._component(0)

    @property
    def scattered(self) -> list[PathComponent]:
        return [self._component(k) for k in range(1, len(self))]


@dataclass(frozen=True)
class Cluster:
    """Scattering cluster: center AoD/AoA (radians) and half-width of the angular spread."""

    theta_T: float
    phi_T: float
    theta_R: float
    phi_R: float
    spread: float = 0.1


_BROADSIDE = np.pi / 2
_OFFSET = 0.45

# Four clusters packed around broadside: only coarsely resolved by a
# half-wavelength array, well resolved by an aperture of a few wavelengths.
DEFAULT_CLUSTERS = (
    Cluster(_BROADSIDE - _OFFSET, _BROADSIDE - _OFFSET, _BROADSIDE + _OFFSET, _BROADSIDE - _OFFSET / 2, 0.1),
    Cluster(_BROADSIDE - _OFFSET, _BROADSIDE + _OFFSET, _BROADSIDE - _OFFSET, _BROADSIDE + _OFFSET / 2, 0.1),
    Cluster(_BROADSIDE + _OFFSET, _BROADSIDE - _OFFSET, _BROADSIDE - _OFFSET / 2, _BROADSIDE - _OFFSET, 0.1),
    Cluster(_BROADSIDE + _OFFSET, _BROADSIDE + _OFFSET, _BROADSIDE + _OFFSET / 2, _BROADSIDE + _OFFSET, 0.1),
)

# (theta_T, phi_T, theta_R, phi_R)
DEFAULT_LOS = (_BROADSIDE - 0.1, _BROADSIDE + 0.15, _BROADSIDE + 0.1, _BROADSIDE - 0.15)


@dataclass(frozen=True)
class ScatteringConfig:
    rician_K: float = 1.0
    clusters: tuple[Cluster, ...] = DEFAULT_CLUSTERS
    paths_per_cluster: int = 10
    rng_seed: int = 0
    los_angles: tuple[float, float, float, float] = DEFAULT_LOS

    def __post_init__(self):
        if not np.isfinite(self.rician_K) or self.rician_K < 0:
            raise ValueError(f"rician_K must be a finite nonnegative number, got {self.rician_K}")
        if self.paths_per_cluster < 1:
            raise ValueError("paths_per_cluster must be a positive integer")
        object.__setattr__(self, "clusters", tuple(self.clusters))
        for c in self.clusters:
            if c.spread < 0:
                raise ValueError("cluster spread must be nonnegative")
            for a in (c.theta_T, c.phi_T, c.theta_R, c.phi_R):
                if not 0.0 <= a <= np.pi:
                    raise ValueError("cluster center angles must lie in [0, pi]")
        if any(not 0.0 <= a <= np.pi for a in self.los_angles):
            raise ValueError("line-of-sight angles must lie in [0, pi]")

    @property
    def n_scattered(self) -> int:
        return len(self.clusters) * self.paths_per_cluster

    @property
    def los_gain(self) -> float:
        K = self.rician_K
        return float(np.sqrt(K / (K + 1.0)))

    @property
    def path_variance(self) -> float:
        """Variance of each scattered path gain (equal split of 1/(K+1))."""
        if self.n_scattered == 0:
            return 0.0
        return 1.0 / ((self.rician_K + 1.0) * self.n_scattered)


def sample_spreading(cfg: ScatteringConfig, rng: np.random.Generator) -> PathSet:
    """Draw one path set: the fixed LOS path plus clustered Rayleigh paths."""
    L = cfg.n_scattered
    gains = np.empty(L + 1, dtype=complex)
    gains[0] = cfg.los_gain
    angles = np.empty((4, L + 1))
    angles[:, 0] = cfg.los_angles
    if L:
        centers = np.array(
            [[c.theta_T, c.phi_T, c.theta_R, c.phi_R] for c in cfg.clusters]
        ).T
        spreads = np.array([c.spread for c in cfg.clusters])
        centers = np.repeat(centers, cfg.paths_per_cluster, axis=1)
        spreads = np.repeat(spreads, cfg.paths_per_cluster)
        offsets = rng.uniform(-1.0, 1.0, size=(4, L)) * spreads
        angles[:, 1:] = np.clip(centers + offsets, 0.0, np.pi)
        scale = np.sqrt(cfg.path_variance / 2.0)
        gains[1:] = scale * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    return PathSet(gains, *angles)


@dataclass
class ChannelRealization:
    H: np.ndarray
    pathset: PathSet | None
    H_los: np.ndarray = field(repr=False, default=None)

    @property
    def H_scattered(self) -> np.ndarray:
        return self.H - self.H_los


def as_positions(p) -> np.ndarray:
    if isinstance(p, AntennaLayout):
        return p.positions
    return np.asarray(p, dtype=float).reshape(-1, 2)


def synthesize_channel(ps: PathSet, t, r) -> ChannelRealization:
    """Channel matrix ``(M, N)`` of path set ``ps`` for transmit ``t`` and receive ``r``."""
    t = as_positions(t)
    r = as_positions(r)
    if len(t) < 1 or len(r) < 1:
        raise ValueError("both arrays need at least one antenna")
    AT = steering_matrix(t, ps.theta_T, ps.phi_T)
    AR = steering_matrix(r, ps.theta_R, ps.phi_R)
    H_los = ps.gains[0] * np.outer(AR[:, 0], AT[:, 0].conj())
    H_sc = (AR[:, 1:] * ps.gains[1:]) @ AT[:, 1:].conj().T
    return ChannelRealization(H_los + H_sc, ps, H_los)


def sample_channels(
    cfg: ScatteringConfig,
    t,
    r,
    indices: Sequence[int],
    stream: int = EVALUATION_STREAM,
) -> np.ndarray:
    """Stacked channel matrices ``(S, M, N)``, one per draw index of ``stream``.

    Draw ``i`` always uses ``path_rng(cfg.rng_seed, stream, i)``, so any subset
    or ordering of indices reproduces the same matrices.
    """
    t = as_positions(t)
    r = as_positions(r)
    sets = [sample_spreading(cfg, path_rng(cfg.rng_seed, stream, i)) for i in indices]
    if not sets:
        return np.zeros((0, len(r), len(t)), dtype=complex)
    g = np.stack([s.gains for s in sets])
    AT = _batch_steering(t, np.stack([s.theta_T for s in sets]), np.stack([s.phi_T for s in sets]))
    AR = _batch_steering(r, np.stack([s.theta_R for s in sets]), np.stack([s.phi_R for s in sets]))
    return np.einsum("sml,sl,snl->smn", AR, g, AT.conj())


def _batch_steering(pos: np.ndarray, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    # theta, phi: (S, L) -> (S, n, L)
    ux = np.sin(theta) * np.cos(phi)
    uy = np.cos(theta)
    rho = pos[None, :, 0, None] * ux[:, None, :] + pos[None, :, 1, None] * uy[:, None, :]
    return np.exp(-2j * np.pi * rho) / np.sqrt(len(pos))
