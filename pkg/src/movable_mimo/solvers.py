"""Per-iteration convex subproblems.

* general movement mode: surrogate maximization under the convexified spacing
  constraints, and the slack-maximizing feasibility problem, both solved with a
  log-barrier interior-point method (Newton inner steps);
* covariance: eigen-decomposition of the surrogate's linear term and a
  water level found by bisection;
* linear / planar modes: the unconstrained maximizer clamped into each box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import AntennaLayout, Region
from .rate import CovarianceMatrix
from .surrogate import ConstraintSurrogate, QuadraticSurrogate

__all__ = [
    "BarrierSolverConfig",
    "FeasibilityResult",
    "InfeasibleStartError",
    "solve_positions_general",
    "solve_feasibility",
    "solve_covariance",
    "water_levels",
    "bisection_water_level",
    "solve_positions_boxed",
]


class InfeasibleStartError(ValueError):
    """No strictly feasible start point for the barrier method."""


@dataclass(frozen=True)
class BarrierSolverConfig:
    epsilon: float = 1e-6
    max_newton_steps: int = 100
    initial_barrier_weight: float = 1.0
    barrier_decrease_factor: float = 0.05

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_newton_steps < 1:
            raise ValueError("max_newton_steps must be at least 1")
        if not self.initial_barrier_weight > 0:
            raise ValueError("initial_barrier_weight must be positive")
        if not 0.0 < self.barrier_decrease_factor < 1.0:
            raise ValueError("barrier_decrease_factor must lie in (0, 1)")


@dataclass
class FeasibilityResult:
    positions: AntennaLayout
    alpha: float


# ---------------------------------------------------------------------------
# log-barrier core
#
# Every constraint here is separable-quadratic:
#     c_k(z) = sum_i A[k, i] z_i^2 + a[k] . z + b[k] >= 0,   A <= 0
# and the objective is  sum_i F_i z_i^2 + f . z  with F <= 0.


def _constraint_values(A, a, b, z):
    return A @ (z * z) + a @ z + b


def _barrier_maximize(F, f, A, a, b, z0, cfg: BarrierSolverConfig):
    z = np.array(z0, dtype=float)
    m = len(b)
    if m == 0:
        return z
    c = A @ (z * z) + a @ z + b
    if c.min() <= 0:
        raise InfeasibleStartError("barrier start point is not strictly feasible")
    n = len(z)
    diag = np.diag_indices(n)
    w = cfg.initial_barrier_weight
    while True:
        phi = -(F @ (z * z) + f @ z) - w * np.log(c).sum()
        for _ in range(cfg.max_newton_steps):
            G = 2.0 * A * z + a  # rows: constraint gradients
            Gs = G / c[:, None]
            grad = -(2.0 * F * z + f) - w * Gs.sum(axis=0)
            hess = w * (Gs.T @ Gs)
            hess[diag] -= 2.0 * F + w * (2.0 * A / c[:, None]).sum(axis=0)
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = -grad @ step
            if dec <= 2e-12 * max(1.0, w):
                break
            # backtracking: stay strictly feasible, then Armijo
            s = 1.0
            while s > 1e-14:
                z_new = z + s * step
                c_new = A @ (z_new * z_new) + a @ z_new + b
                if c_new.min() > 0:
                    phi_new = -(F @ (z_new * z_new) + f @ z_new) - w * np.log(c_new).sum()
                    if phi_new <= phi - 0.01 * s * dec:
                        break
                s *= 0.5
            else:
                break
            z, c, phi = z_new, c_new, phi_new
        if m * w < cfg.epsilon:
            return z
        w *= cfg.barrier_decrease_factor


def _box_constraints(lower: np.ndarray, upper: np.ndarray, n_var: int):
    """Rows ``z_i - lo_i >= 0`` and ``hi_i - z_i >= 0`` for the first ``len(lower)`` coordinates."""
    k = len(lower)
    eye = np.zeros((k, n_var))
    eye[:, :k] = np.eye(k)
    a = np.vstack([eye, -eye])
    b = np.concatenate([-lower, upper])
    return np.zeros((2 * k, n_var)), a, b


def _pair_constraints(constraints: list[ConstraintSurrogate], n_ant: int, n_var: int, offset: float,
                      alpha_column: bool):
    """Rows for ``gbar_ij(x) - offset (- alpha) >= 0``."""
    m = len(constraints)
    A = np.zeros((m, n_var))
    a = np.zeros((m, n_var))
    b = np.zeros(m)
    for k, cs in enumerate(constraints):
        i, j, tau = cs.i, cs.j, cs.tau
        d = cs.p_i - cs.p_j
        si = slice(2 * i, 2 * i + 2)
        sj = slice(2 * j, 2 * j + 2)
        A[k, si] = tau
        A[k, sj] = tau
        a[k, si] = -2.0 * tau * cs.p_i + 2.0 * d
        a[k, sj] = -2.0 * tau * cs.p_j - 2.0 * d
        b[k] = tau * (cs.p_i @ cs.p_i + cs.p_j @ cs.p_j) - d @ d - offset
        if alpha_column:
            a[k, -1] = -1.0
    return A, a, b


def _region_bounds(region: Region, n_ant: int):
    lo = np.tile(np.asarray(region.lower), n_ant)
    hi = np.tile(np.asarray(region.upper), n_ant)
    if np.any(hi - lo <= 0):
        raise ValueError("general-mode region must have positive width and height")
    return lo, hi


def _interior_start(x, lo, hi):
    margin = 1e-6 * (hi - lo)
    return np.clip(x, lo + margin, hi - margin)


def _n_antennas(constraints, start) -> int:
    if start is not None:
        return len(np.asarray(start, dtype=float).reshape(-1, 2))
    if not constraints:
        raise ValueError("cannot infer antenna count without constraints or a start point")
    return 1 + max(max(cs.i, cs.j) for cs in constraints)


def _expansion_points(constraints, n_ant: int) -> np.ndarray:
    x = np.full((n_ant, 2), np.nan)
    for cs in constraints:
        x[cs.i] = cs.p_i
        x[cs.j] = cs.p_j
    if np.isnan(x).any():
        raise ValueError("constraints do not cover every antenna; pass a start point")
    return x.reshape(-1)


def solve_feasibility(
    constraints: list[ConstraintSurrogate],
    region: Region,
    D: float,
    cfg: BarrierSolverConfig | None = None,
    start=None,
) -> FeasibilityResult:
    """Maximize the common slack ``alpha`` of all surrogate spacing constraints inside ``region``.

    ``alpha`` in the result is the slack actually achieved at the returned
    positions. With fewer than two antennas there is nothing to separate and
    ``alpha`` is ``inf``.
    """
    cfg = cfg or BarrierSolverConfig()
    n_ant = _n_antennas(constraints, start)
    x0 = (np.asarray(start, dtype=float).reshape(-1) if start is not None
          else _expansion_points(constraints, n_ant))
    lo, hi = _region_bounds(region, n_ant)
    x0 = _interior_start(x0, lo, hi)
    regions = [region] * n_ant
    if not constraints:
        return FeasibilityResult(AntennaLayout(x0.reshape(-1, 2), regions), np.inf)

    n_var = 2 * n_ant + 1
    Ap, ap, bp = _pair_constraints(constraints, n_ant, n_var, D**2, alpha_column=True)
    Ab, ab, bb = _box_constraints(lo, hi, n_var)
    A = np.vstack([Ap, Ab])
    a = np.vstack([ap, ab])
    b = np.concatenate([bp, bb])

    slack0 = _constraint_values(Ap, ap, bp, np.append(x0, 0.0))
    z0 = np.append(x0, np.min(slack0) - 1.0)
    F = np.zeros(n_var)
    f = np.zeros(n_var)
    f[-1] = 1.0
    z = _barrier_maximize(F, f, A, a, b, z0, cfg)
    x = z[:-1]
    alpha = float(np.min(_constraint_values(Ap, ap, bp, np.append(x, 0.0))))
    return FeasibilityResult(AntennaLayout(x.reshape(-1, 2), regions), alpha)


def solve_positions_general(
    surr: QuadraticSurrogate,
    constraints: list[ConstraintSurrogate],
    region: Region,
    D: float,
    cfg: BarrierSolverConfig | None = None,
    start=None,
) -> AntennaLayout:
    """Maximize ``surr`` subject to ``gbar_ij >= D^2`` for every pair and the region box.

    ``start`` must be strictly feasible; it defaults to the constraints'
    expansion points. When the unconstrained maximizer is itself strictly
    feasible it is returned exactly.
    """
    cfg = cfg or BarrierSolverConfig()
    if not surr.a < 0:
        raise ValueError("position surrogate must be strictly concave (a < 0)")
    n_ant = len(surr.b) // 2
    lo, hi = _region_bounds(region, n_ant)
    n_var = 2 * n_ant
    Ap, ap, bp = _pair_constraints(constraints, n_ant, n_var, D**2, alpha_column=False)
    Ab, ab, bb = _box_constraints(lo, hi, n_var)
    A = np.vstack([Ap, Ab])
    a = np.vstack([ap, ab])
    b = np.concatenate([bp, bb])
    regions = [region] * n_ant

    x_free = surr.maximizer()
    if np.min(_constraint_values(A, a, b, x_free)) > 0:
        return AntennaLayout(x_free.reshape(-1, 2), regions)

    if start is None:
        x0 = _expansion_points(constraints, n_ant) if constraints else np.clip(x_free, lo, hi)
    else:
        x0 = np.asarray(start, dtype=float).reshape(-1)
    x0 = _interior_start(x0, lo, hi)
    if Ap.size and np.min(_constraint_values(Ap, ap, bp, x0)) <= 0:
        raise InfeasibleStartError(
            "start point violates the surrogate spacing constraints; solve the feasibility problem"
        )
    F = np.full(n_var, surr.a)
    z = _barrier_maximize(F, surr.b, A, a, b, x0, cfg)
    return AntennaLayout(z.reshape(-1, 2), regions)


# ---------------------------------------------------------------------------
# covariance update


def water_levels(eigs, a_Q: float, u: float) -> np.ndarray:
    """Per-eigenmode power ``max(0, -(eig - u) / (2 a_Q))``."""
    return np.maximum(0.0, -(np.asarray(eigs, dtype=float) - u) / (2.0 * a_Q))


def bisection_water_level(eigs, a_Q: float, P: float, tol: float = 1e-9, max_halvings: int = 200) -> float:
    """Water level ``u* >= 0`` at which the allocated power equals ``P``.

    Requires the allocation at ``u = 0`` to exceed ``P``. The total power is
    continuous and non-increasing in ``u``, and zero at ``u = max(eigs)``.
    """
    eigs = np.asarray(eigs, dtype=float)
    if not a_Q < 0:
        raise ValueError("a_Q must be negative")
    if P < 0:
        raise ValueError("power budget must be nonnegative")
    if not np.sum(water_levels(eigs, a_Q, 0.0)) > P:
        raise ValueError("power constraint is inactive at u = 0; no water level to find")
    lo, hi = 0.0, float(np.max(eigs))
    target = tol * max(P, 1.0)
    u = hi
    for _ in range(max_halvings):
        u = 0.5 * (lo + hi)
        total = np.sum(water_levels(eigs, a_Q, u))
        if abs(total - P) <= target * 1e-3:
            break
        if total > P:
            lo = u
        else:
            hi = u
        if hi - lo <= np.finfo(float).eps * max(1.0, abs(hi)):
            break
    # on the located support the total is affine in u: solve it exactly
    support = eigs > u
    if P > 0 and support.any():
        u_exact = (np.sum(eigs[support]) + 2.0 * a_Q * P) / np.count_nonzero(support)
        if u_exact >= 0 and abs(np.sum(water_levels(eigs, a_Q, u_exact)) - P) <= target:
            return float(u_exact)
    return float(u if P > 0 else hi)


def solve_covariance(a_Q: float, B_Q, P: float) -> CovarianceMatrix:
    """Maximize ``a_Q ||Q||^2 + Re Tr(B_Q^H Q)`` over ``Q >= 0, Tr Q <= P``.

    Eigen-decomposes ``B_Q`` and allocates ``max(0, -(eig - u*)/(2 a_Q))`` to
    each eigenvector; ``u* = 0`` when that already fits the budget.
    """
    if not a_Q < 0:
        raise ValueError(f"a_Q must be negative, got {a_Q}")
    if P < 0:
        raise ValueError("power budget must be nonnegative")
    B = np.asarray(B_Q, dtype=complex)
    B = 0.5 * (B + B.conj().T)
    eigs, U = np.linalg.eigh(B)
    order = np.argsort(-eigs, kind="stable")
    eigs, U = eigs[order], U[:, order]
    levels = water_levels(eigs, a_Q, 0.0)
    if np.sum(levels) > P:
        levels = water_levels(eigs, a_Q, bisection_water_level(eigs, a_Q, P))
        total = np.sum(levels)
        if total > P:
            levels *= P / total
    Q = (U * levels) @ U.conj().T
    return CovarianceMatrix(0.5 * (Q + Q.conj().T), P)


# ---------------------------------------------------------------------------
# linear / planar modes


def solve_positions_boxed(surr: QuadraticSurrogate, regions) -> AntennaLayout:
    """Clamp the unconstrained maximizer coordinate-wise into each antenna's box.

    ``regions`` is a list of per-antenna :class:`Region` or an
    :class:`AntennaLayout` whose regions are used.
    """
    if isinstance(regions, AntennaLayout):
        regions = regions.regions
    regions = list(regions)
    x = surr.maximizer().reshape(-1, 2)
    if len(x) != len(regions):
        raise ValueError(f"surrogate covers {len(x)} antennas but {len(regions)} regions given")
    lo = np.array([r.lower for r in regions])
    hi = np.array([r.upper for r in regions])
    return AntennaLayout(np.clip(x, lo, hi), regions)
