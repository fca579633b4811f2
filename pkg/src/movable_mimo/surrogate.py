"""Recursive quadratic surrogates for the objective and the antenna-spacing constraints.

Each objective surrogate is kept in expanded form ``a*||x||^2 + b.x + c`` and
updated as a convex combination of its previous value and a fresh first-order
model with curvature ``tau < 0``. Constraint surrogates lower-bound the
squared antenna distance and touch it at the expansion point.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

__all__ = [
    "QuadraticSurrogate",
    "MatrixQuadraticSurrogate",
    "ConstraintSurrogate",
    "SurrogateState",
    "update_quadratic_surrogate",
    "update_matrix_surrogate",
    "constraint_surrogate_value",
    "pairwise_constraints",
]


def _check_step(rho: float, tau: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if not tau < 0.0:
        raise ValueError(f"tau must be negative, got {tau}")


@dataclass
class QuadraticSurrogate:
    a: float
    b: np.ndarray
    c: float

    @classmethod
    def zero(cls, dim: int) -> "QuadraticSurrogate":
        return cls(0.0, np.zeros(dim), 0.0)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(self.a * (x @ x) + self.b @ x + self.c)

    def maximizer(self) -> np.ndarray:
        """Unconstrained maximizer ``-b / (2a)``."""
        if not self.a < 0:
            raise ValueError("surrogate is not strictly concave")
        return -self.b / (2.0 * self.a)


@dataclass
class MatrixQuadraticSurrogate:
    a_Q: float
    B_Q: np.ndarray
    c_Q: float

    @classmethod
    def zero(cls, n: int) -> "MatrixQuadraticSurrogate":
        return cls(0.0, np.zeros((n, n), dtype=complex), 0.0)

    def __call__(self, Q) -> float:
        Q = np.asarray(Q, dtype=complex)
        return float(
            self.a_Q * np.sum(np.abs(Q) ** 2) + np.real(np.vdot(self.B_Q, Q)) + self.c_Q
        )


def update_quadratic_surrogate(
    prev: QuadraticSurrogate, grad, x_t, rho: float, tau: float
) -> QuadraticSurrogate:
    """``(1-rho)*prev + rho*(grad.(x - x_t) + tau*||x - x_t||^2)`` in expanded form."""
    _check_step(rho, tau)
    grad = np.asarray(grad, dtype=float).reshape(-1)
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    if grad.shape != prev.b.shape or x_t.shape != prev.b.shape:
        raise ValueError("gradient and expansion point must match the surrogate dimension")
    a = tau
    b = grad - 2.0 * tau * x_t
    c = tau * (x_t @ x_t) - grad @ x_t
    return QuadraticSurrogate(
        (1.0 - rho) * prev.a + rho * a,
        (1.0 - rho) * prev.b + rho * b,
        (1.0 - rho) * prev.c + rho * c,
    )


def update_matrix_surrogate(
    prev: MatrixQuadraticSurrogate, gradQ, Q_t, rho: float, tau: float
) -> MatrixQuadraticSurrogate:
    """Matrix analogue of :func:`update_quadratic_surrogate` with Frobenius products."""
    _check_step(rho, tau)
    gradQ = np.asarray(gradQ, dtype=complex)
    Q_t = np.asarray(Q_t, dtype=complex)
    B = gradQ - 2.0 * tau * Q_t
    c = tau * np.sum(np.abs(Q_t) ** 2) - np.real(np.vdot(gradQ, Q_t))
    B_new = (1.0 - rho) * prev.B_Q + rho * B
    return MatrixQuadraticSurrogate(
        (1.0 - rho) * prev.a_Q + rho * tau,
        0.5 * (B_new + B_new.conj().T),
        float((1.0 - rho) * prev.c_Q + rho * c),
    )


@dataclass(frozen=True)
class ConstraintSurrogate:
    """Concave lower bound on ``||x_i - x_j||^2`` expanded at ``(p_i, p_j)``."""

    i: int
    j: int
    p_i: np.ndarray
    p_j: np.ndarray
    tau: float = -1.0

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("constraint surrogate needs two distinct antennas")
        if not self.tau < 0:
            raise ValueError(f"tau must be negative, got {self.tau}")
        object.__setattr__(self, "p_i", np.asarray(self.p_i, dtype=float))
        object.__setattr__(self, "p_j", np.asarray(self.p_j, dtype=float))

    def __call__(self, x_i, x_j) -> float:
        return constraint_surrogate_value(self, x_i, x_j)


def constraint_surrogate_value(cs: ConstraintSurrogate, t_i, t_j) -> float:
    t_i = np.asarray(t_i, dtype=float)
    t_j = np.asarray(t_j, dtype=float)
    d = cs.p_i - cs.p_j
    di = t_i - cs.p_i
    dj = t_j - cs.p_j
    return float(cs.tau * (di @ di + dj @ dj) + 2.0 * d @ (t_i - t_j) - d @ d)


def pairwise_constraints(positions, tau: float = -1.0) -> list[ConstraintSurrogate]:
    """One constraint surrogate per antenna pair, expanded at ``positions``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    return [ConstraintSurrogate(i, j, pos[i], pos[j], tau) for i, j in combinations(range(len(pos)), 2)]


@dataclass
class SurrogateState:
    f_t: QuadraticSurrogate
    f_r: QuadraticSurrogate
    f_Q: MatrixQuadraticSurrogate

    @classmethod
    def zero(cls, N: int, M: int) -> "SurrogateState":
        return cls(
            QuadraticSurrogate.zero(2 * N),
            QuadraticSurrogate.zero(2 * M),
            MatrixQuadraticSurrogate.zero(N),
        )
