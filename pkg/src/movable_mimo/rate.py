"""Achievable rate of one channel realization, its Monte-Carlo average, and gradients.

Rates are in bits per channel use, so every gradient carries a ``1/ln 2``.
The covariance gradient is the Hermitian matrix ``G`` with
``ds = Re Tr(G^H dQ)``; position gradients use the interleaved
``(x1, y1, x2, y2, ...)`` packing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import (
    EVALUATION_STREAM,
    ChannelRealization,
    ScatteringConfig,
    as_positions,
    sample_channels,
    steering_matrix,
)

LN2 = np.log(2.0)

__all__ = [
    "CovarianceMatrix",
    "RateSample",
    "validate_covariance",
    "achievable_rate",
    "average_rate",
    "average_rate_stats",
    "grad_rate_covariance",
    "grad_rate_positions",
    "rate_sample",
]


@dataclass
class CovarianceMatrix:
    """Transmit covariance with its power budget."""

    Q: np.ndarray
    power: float

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=complex)
        validate_covariance(self.Q, self.power)

    @classmethod
    def uniform(cls, n: int, power: float) -> "CovarianceMatrix":
        return cls(np.eye(n, dtype=complex) * (power / n), power)


def validate_covariance(Q, power: float | None = None, tol: float = 1e-9) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"covariance must be square, got shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
    if np.max(np.abs(Q - Q.conj().T), initial=0.0) > tol * scale:
        raise ValueError("covariance is not Hermitian")
    if Q.size and np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[0] < -tol * scale:
        raise ValueError("covariance is not positive semidefinite")
    if power is not None:
        if power < 0:
            raise ValueError("power budget must be nonnegative")
        if np.trace(Q).real > power + tol:
            raise ValueError(f"trace {np.trace(Q).real:.6g} exceeds power budget {power:.6g}")
    return Q


def _as_matrix(Q) -> np.ndarray:
    if isinstance(Q, CovarianceMatrix):
        return Q.Q
    return validate_covariance(Q)


def _check_sigma2(sigma2: float) -> None:
    if not sigma2 > 0:
        raise ValueError(f"noise power must be positive, got {sigma2}")


def _factor(H: np.ndarray, Q: np.ndarray, sigma2: float):
    M = H.shape[0]
    A = np.eye(M) + (H @ Q @ H.conj().T) / sigma2
    A = 0.5 * (A + A.conj().T)
    return cho_factor(A, lower=True)


def achievable_rate(H, Q, sigma2: float) -> float:
    """``log2 det(I + H Q H^H / sigma2)``."""
    _check_sigma2(sigma2)
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    Q = _as_matrix(Q)
    c, _ = _factor(H, Q, sigma2)
    return max(0.0, 2.0 * float(np.sum(np.log(np.abs(np.diag(c))))) / LN2)


def grad_rate_covariance(H, Q, sigma2: float) -> np.ndarray:
    """``H^H (I + H Q H^H/sigma2)^{-1} H / (sigma2 ln 2)``, Hermitian PSD."""
    _check_sigma2(sigma2)
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    Q = _as_matrix(Q)
    fac = _factor(H, Q, sigma2)
    G = H.conj().T @ cho_solve(fac, H) / (sigma2 * LN2)
    return 0.5 * (G + G.conj().T)


@dataclass
class RateSample:
    value: float
    grad_t: np.ndarray
    grad_r: np.ndarray
    grad_Q: np.ndarray


def _position_gradients(realization: ChannelRealization, t, r, Q, sigma2, fac):
    ps = realization.pathset
    if ps is None:
        raise ValueError("position gradients need the realization's path set")
    t = as_positions(t)
    r = as_positions(r)
    H = realization.H
    AT = steering_matrix(t, ps.theta_T, ps.phi_T)
    AR = steering_matrix(r, ps.theta_R, ps.phi_R)
    # ds = 2 Re sum conj(GH) * dH
    GH = cho_solve(fac, H @ Q) / (sigma2 * LN2)
    g = ps.gains
    # transmit side: d conj(a_T[n, l]) / dx = +j 2 pi ux_l conj(a_T[n, l])
    Ct = (GH.conj().T @ AR) * g * AT.conj()
    ux_t = np.sin(ps.theta_T) * np.cos(ps.phi_T)
    uy_t = np.cos(ps.theta_T)
    grad_t = np.empty((len(t), 2))
    grad_t[:, 0] = 2.0 * np.real(2j * np.pi * (Ct @ ux_t))
    grad_t[:, 1] = 2.0 * np.real(2j * np.pi * (Ct @ uy_t))
    # receive side: d a_R[m, l] / dx = -j 2 pi ux_l a_R[m, l]
    Cr = (GH.conj() @ AT.conj()) * g * AR
    ux_r = np.sin(ps.theta_R) * np.cos(ps.phi_R)
    uy_r = np.cos(ps.theta_R)
    grad_r = np.empty((len(r), 2))
    grad_r[:, 0] = 2.0 * np.real(-2j * np.pi * (Cr @ ux_r))
    grad_r[:, 1] = 2.0 * np.real(-2j * np.pi * (Cr @ uy_r))
    return grad_t.reshape(-1), grad_r.reshape(-1)


def grad_rate_positions(realization: ChannelRealization, t, r, Q, sigma2: float):
    """Exact gradient of the rate of ``realization`` w.r.t. every antenna coordinate.

    Returns ``(grad_t, grad_r)`` as flat real vectors of length ``2N`` and ``2M``.
    """
    _check_sigma2(sigma2)
    Q = _as_matrix(Q)
    fac = _factor(realization.H, Q, sigma2)
    return _position_gradients(realization, t, r, Q, sigma2, fac)


def rate_sample(realization: ChannelRealization, t, r, Q, sigma2: float) -> RateSample:
    """Rate and all three gradients from a single Cholesky factorization."""
    _check_sigma2(sigma2)
    Q = _as_matrix(Q)
    H = realization.H
    fac = _factor(H, Q, sigma2)
    value = max(0.0, 2.0 * float(np.sum(np.log(np.abs(np.diag(fac[0]))))) / LN2)
    GQ = H.conj().T @ cho_solve(fac, H) / (sigma2 * LN2)
    gt, gr = _position_gradients(realization, t, r, Q, sigma2, fac)
    return RateSample(value, gt, gr, 0.5 * (GQ + GQ.conj().T))


def _rates_batch(Hs: np.ndarray, Q: np.ndarray, sigma2: float) -> np.ndarray:
    M = Hs.shape[1]
    A = np.eye(M) + np.einsum("smn,nk,sjk->smj", Hs, Q, Hs.conj()) / sigma2
    sign, logdet = np.linalg.slogdet(A)
    return np.maximum(logdet.real / LN2, 0.0)


def average_rate_stats(
    t,
    r,
    Q,
    cfg: ScatteringConfig,
    samples: int,
    sigma2: float,
    stream: int = EVALUATION_STREAM,
    chunk: int = 2000,
) -> tuple[float, float]:
    """Monte-Carlo mean rate over draws ``0..samples-1`` and its standard error."""
    if samples < 1:
        raise ValueError("need at least one Monte-Carlo sample")
    _check_sigma2(sigma2)
    Q = _as_matrix(Q)
    rates = np.empty(samples)
    for start in range(0, samples, chunk):
        idx = range(start, min(samples, start + chunk))
        rates[start : start + len(idx)] = _rates_batch(sample_channels(cfg, t, r, idx, stream), Q, sigma2)
    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr


def average_rate(t, r, Q, cfg: ScatteringConfig, samples: int, sigma2: float,
                 stream: int = EVALUATION_STREAM) -> float:
    """Monte-Carlo estimate of the average achievable rate."""
    return average_rate_stats(t, r, Q, cfg, samples, sigma2, stream)[0]
