"""Inference for the fitted main effects and loadings.

Time indices are zero-based throughout (``t=9`` is the tenth frame).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .model import MEFMFit, MeanEffects, as_series

__all__ = [
    "EffectStats",
    "GammaEstimates",
    "HACCovariance",
    "RotationMatrix",
    "SingularCovarianceWarning",
    "contrast_stat",
    "default_bandwidth",
    "gamma_estimates",
    "gamma_estimates_time_averaged",
    "hac_loading",
    "inv_sqrt_psd",
    "loading_row_z",
    "rotation_H",
    "standardized_effect_stats",
]

Side = Literal["row", "column"]


class SingularCovarianceWarning(UserWarning):
    """A covariance estimate had to be pseudo-inverted."""


@dataclass(frozen=True)
class GammaEstimates:
    gamma_alpha_sq: np.ndarray
    gamma_beta_sq: np.ndarray
    gamma_mu_sq: float
    t_used: Optional[int]


@dataclass(frozen=True)
class EffectStats:
    """Studentised estimation errors of the main effects at one time point.

    Entries whose variance estimate is zero are NaN and ``degenerate`` is set.
    """

    mu: float
    alpha: np.ndarray
    beta: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class HACCovariance:
    side: Side
    j: int
    bandwidth: int
    matrix: np.ndarray


@dataclass(frozen=True)
class RotationMatrix:
    side: Side
    matrix: np.ndarray


def _check_side(side: str) -> Side:
    if side not in ("row", "column"):
        raise ValueError(f"side must be 'row' or 'column', got {side!r}")
    return side  # type: ignore[return-value]


def gamma_estimates(E, t: int) -> GammaEstimates:
    """Row, column and overall mean squared residuals of frame ``t``."""
    E = as_series(E)
    T, p, q = E.shape
    if not 0 <= t < T:
        raise IndexError(f"t={t} out of range for T={T}")
    sq = E[t] ** 2
    g_alpha = sq.sum(axis=1) / q
    g_beta = sq.sum(axis=0) / p
    return GammaEstimates(g_alpha, g_beta, float(sq.sum() / (p * q)), t)


def gamma_estimates_time_averaged(E) -> GammaEstimates:
    """Residual variances averaged over all frames.

    A convenience for stationary noise; the single-frame version in
    :func:`gamma_estimates` is the one the normality results are stated for.
    """
    E = as_series(E)
    _, p, q = E.shape
    sq = (E**2).mean(axis=0)
    return GammaEstimates(sq.sum(axis=1) / q, sq.sum(axis=0) / p, float(sq.sum() / (p * q)), None)


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(np.broadcast(num, den).shape, np.nan)
    ok = den > 0
    np.divide(num, den, out=out, where=ok)
    return out, bool(np.all(ok))


def standardized_effect_stats(fit: MEFMFit, t: int, truth: MeanEffects) -> EffectStats:
    """``sqrt(pq)(mu_hat - mu)/gamma_mu``, ``sqrt(q)(alpha_hat - alpha)/gamma_alpha``, ``sqrt(p)(beta_hat - beta)/gamma_beta``.

    ``truth`` carries either the simulated effects or hypothesised values
    (only frame ``t`` is read).
    """
    T, p, q = fit.shape
    gam = gamma_estimates(fit.E, t)
    eff = fit.effects
    mu, ok_mu = _safe_ratio(
        math.sqrt(p * q) * (eff.mu[t] - truth.mu[t]), math.sqrt(gam.gamma_mu_sq)
    )
    alpha, ok_a = _safe_ratio(
        math.sqrt(q) * (eff.alpha[t] - truth.alpha[t]), np.sqrt(gam.gamma_alpha_sq)
    )
    beta, ok_b = _safe_ratio(
        math.sqrt(p) * (eff.beta[t] - truth.beta[t]), np.sqrt(gam.gamma_beta_sq)
    )
    return EffectStats(float(mu), alpha, beta, not (ok_mu and ok_a and ok_b))


def contrast_stat(
    fit: MEFMFit,
    t: int,
    g: Sequence[float],
    indices: Sequence[int],
    theta: Sequence[float],
    side: Side = "row",
) -> float:
    """Studentised linear contrast ``g'(theta_hat - theta)`` of selected effects.

    For rows: ``sqrt(q) (g' diag(gamma_alpha^2) g)^{-1/2} g'(theta_hat - theta)``
    where ``theta_hat`` collects ``alpha_hat[t, indices]``. Columns use
    ``beta`` and ``sqrt(p)``.
    """
    side = _check_side(side)
    g = np.asarray(g, dtype=float)
    idx = np.asarray(indices, dtype=int)
    theta = np.asarray(theta, dtype=float)
    if not g.shape == idx.shape == theta.shape:
        raise ValueError("g, indices and theta must have equal length")
    _, p, q = fit.shape
    gam = gamma_estimates(fit.E, t)
    if side == "row":
        est, var, root = fit.effects.alpha[t, idx], gam.gamma_alpha_sq[idx], math.sqrt(q)
    else:
        est, var, root = fit.effects.beta[t, idx], gam.gamma_beta_sq[idx], math.sqrt(p)
    denom = float(np.sum(g**2 * var))
    if denom <= 0:
        return math.nan
    return root * float(g @ (est - theta)) / math.sqrt(denom)


def rotation_H(
    fit: MEFMFit, Qr_true, Qc_true, FZ_true
) -> tuple[RotationMatrix, RotationMatrix]:
    """Rotations linking estimated and true loadings (simulation only).

    ``H_r = T^{-1} Dr^{-1} Qr_hat' Qr sum_t FZ_t Qc'Qc FZ_t'`` and
    ``H_c = T^{-1} Dc^{-1} Qc_hat' Qc sum_t FZ_t' Qr'Qr FZ_t``.
    """
    T, p, q = fit.shape
    Qr = np.asarray(Qr_true, dtype=float)
    Qc = np.asarray(Qc_true, dtype=float)
    FZ = np.asarray(FZ_true, dtype=float)
    kr, kc = fit.kr, fit.kc
    if Qr.shape != (p, kr) or Qc.shape != (q, kc) or FZ.shape != (T, kr, kc):
        raise ValueError(
            f"truth shapes {Qr.shape}, {Qc.shape}, {FZ.shape} do not match fit "
            f"(T, p, q, kr, kc) = {(T, p, q, kr, kc)}"
        )
    if np.any(fit.Dr <= 0) or np.any(fit.Dc <= 0):
        raise np.linalg.LinAlgError("estimated eigenvalue matrix is singular")
    gram_r = Qr.T @ Qr
    gram_c = Qc.T @ Qc
    sum_r = np.einsum("tab,bc,tdc->ad", FZ, gram_c, FZ)
    sum_c = np.einsum("tba,bc,tcd->ad", FZ, gram_r, FZ)
    Hr = (fit.Qr.T @ Qr @ sum_r) / (T * fit.Dr[:, None])
    Hc = (fit.Qc.T @ Qc @ sum_c) / (T * fit.Dc[:, None])
    return RotationMatrix("row", Hr), RotationMatrix("column", Hc)


def default_bandwidth(T: int, p: int, q: int) -> int:
    """Bartlett bandwidth ``floor((Tpq)^{1/4} / 5)``."""
    return int(math.floor((T * p * q) ** 0.25 / 5))


def _hac_scores(fit: MEFMFit, side: Side, j: int) -> np.ndarray:
    """Per-frame score vectors whose long-run covariance the HAC estimates."""
    T, p, q = fit.shape
    C, E = fit.C, fit.E
    if side == "row":
        if not 0 <= j < p:
            raise IndexError(f"row index {j} out of range for p={p}")
        D, Q = fit.Dr, fit.Qr
        # T^{-1} D^{-1} Q' sum_s C_s C_s'  (k x p)
        W = (Q.T @ np.tensordot(C, C, axes=([0, 2], [0, 2]))) / (T * D[:, None])
        # column j of C_t E_t' is C_t E_t[j, :]'
        g = np.einsum("tab,tb->ta", C, E[:, j, :])
    else:
        if not 0 <= j < q:
            raise IndexError(f"column index {j} out of range for q={q}")
        D, Q = fit.Dc, fit.Qc
        W = (Q.T @ np.tensordot(C, C, axes=([0, 1], [0, 1]))) / (T * D[:, None])
        # column j of C_t' E_t is C_t' E_t[:, j]
        g = np.einsum("tba,tb->ta", C, E[:, :, j])
    if np.any(D <= 0):
        raise np.linalg.LinAlgError("estimated eigenvalue matrix is singular")
    return g @ W.T


def hac_loading(
    fit: MEFMFit, side: Side, j: int, bandwidth: Optional[int] = None
) -> HACCovariance:
    """Bartlett-weighted HAC covariance for row ``j`` of the row or column loadings.

    ``Sigma = D_0 + sum_{v=1}^{eta} (1 - v/(1+eta)) (D_v + D_v')`` with
    ``D_v = sum_{t>v} s_t s_{t-v}'`` built from the fitted ``Dr``, ``Qr``,
    ``C_t`` and ``E_t`` (or their column counterparts).
    """
    side = _check_side(side)
    T, p, q = fit.shape
    eta = default_bandwidth(T, p, q) if bandwidth is None else int(bandwidth)
    if eta < 0:
        raise ValueError("bandwidth must be non-negative")
    if eta >= T:
        raise ValueError(f"bandwidth {eta} must be smaller than T={T}")
    s = _hac_scores(fit, side, j)
    sigma = s.T @ s
    for v in range(1, eta + 1):
        Dv = s[v:].T @ s[:-v]
        sigma += (1.0 - v / (1.0 + eta)) * (Dv + Dv.T)
    return HACCovariance(side, j, eta, 0.5 * (sigma + sigma.T))


def inv_sqrt_psd(S: np.ndarray) -> tuple[np.ndarray, bool]:
    """Symmetric inverse square root with eigenvalue floor ``1e-12 * trace``.

    Eigen-directions at or below the floor are dropped (pseudo-inverse);
    the second return value tells whether that happened.
    """
    S = np.asarray(S, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    floor = 1e-12 * max(float(np.trace(S)), 0.0)
    keep = vals > floor
    inv_root = np.zeros_like(vals)
    inv_root[keep] = vals[keep] ** -0.5
    return (vecs * inv_root) @ vecs.T, not bool(np.all(keep))


def loading_row_z(
    fit: MEFMFit,
    side: Side,
    j: int,
    hac: HACCovariance,
    H: RotationMatrix,
    Q_true_row,
) -> np.ndarray:
    """``T Sigma^{-1/2} D (Q_hat[j] - H Q[j])`` for one loading row.

    Needs the true loading row, so it is a simulation diagnostic; the
    approximate normality also relies on rate conditions that cannot be
    checked from data.
    """
    side = _check_side(side)
    T = fit.shape[0]
    if side == "row":
        D, Q_hat = fit.Dr, fit.Qr
    else:
        D, Q_hat = fit.Dc, fit.Qc
    q_true = np.asarray(Q_true_row, dtype=float).reshape(-1)
    if q_true.shape[0] != Q_hat.shape[1] or H.matrix.shape != (Q_hat.shape[1],) * 2:
        raise ValueError("dimension mismatch between loading row, H and fit")
    root, singular = inv_sqrt_psd(hac.matrix)
    if singular:
        warnings.warn(
            "HAC covariance is singular; using a pseudo-inverse",
            SingularCovarianceWarning,
            stacklevel=2,
        )
    diff = Q_hat[j] - H.matrix @ q_true
    return T * root @ (D * diff)
