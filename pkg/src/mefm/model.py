"""Main effects matrix factor model: data containers and estimators.

A matrix series is held as a float array of shape ``(T, p, q)``; frame ``t``
is ``Y[t]``. The decomposition fitted here is

    Y_t = mu_t 11' + alpha_t 1' + 1 beta_t' + Qr F_t Qc' + E_t

with ``alpha_t`` and ``beta_t`` summing to zero and loadings orthogonal to
the all-ones vector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy as np

from .linalg import double_center, sym_eig_topk


__all__ = [
    "DegenerateFitWarning",
    "FMFit",
    "MEFMFit",
    "MeanEffects",
    "as_series",
    "detrend",
    "estimate_factors",
    "estimate_loadings",
    "estimate_mean_effects",
    "fit_fm",
    "fit_mefm",
    "fm_to_mefm",
    "series_covariances",
]

# entries above which the covariance accumulation switches to Kahan summation
COMPENSATED_SUM_THRESHOLD = 10_000_000


class DegenerateFitWarning(UserWarning):
    """The detrended series carries no common component to estimate."""


def as_series(Y, *, min_dim: int = 1) -> np.ndarray:
    """Validate and return a matrix series as a ``(T, p, q)`` float array.

    A single ``p x q`` matrix is promoted to a series of length one.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 2:
        Y = Y[None]
    if Y.ndim != 3:
        raise ValueError(f"expected a (T, p, q) array, got shape {Y.shape}")
    T, p, q = Y.shape
    if T < 1 or p < min_dim or q < min_dim:
        raise ValueError(f"series dimensions (T, p, q) = {Y.shape} too small")
    if not np.all(np.isfinite(Y)):
        raise ValueError("series contains non-finite entries")
    return Y


@dataclass(frozen=True)
class MeanEffects:
    """Grand mean ``mu`` (T,), row effects ``alpha`` (T, p), column effects ``beta`` (T, q)."""

    mu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def T(self) -> int:
        return self.mu.shape[0]

    def additive(self) -> np.ndarray:
        """The additive part ``mu_t 11' + alpha_t 1' + 1 beta_t'`` as a series."""
        return (
            self.mu[:, None, None]
            + self.alpha[:, :, None]
            + self.beta[:, None, :]
        )

    def scaled(self, c: float) -> "MeanEffects":
        return MeanEffects(c * self.mu, c * self.alpha, c * self.beta)


@dataclass(frozen=True)
class MEFMFit:
    """Fitted main effects factor model.

    ``FZ[t]`` is expressed in the estimator's own loading basis; the true
    factors are only identified up to invertible rotations, so compare
    against ground truth through ``C`` or the column space distance.
    """

    effects: MeanEffects
    L: np.ndarray
    Qr: np.ndarray
    Qc: np.ndarray
    Dr: np.ndarray
    Dc: np.ndarray
    FZ: np.ndarray
    C: np.ndarray
    E: np.ndarray
    degenerate: bool = False
    rank_selection: Optional[object] = field(default=None, repr=False)

    @property
    def kr(self) -> int:
        return self.Qr.shape[1]

    @property
    def kc(self) -> int:
        return self.Qc.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.L.shape

    def reconstruct(self) -> np.ndarray:
        """``additive + C + E``; equals the input series up to rounding."""
        return self.effects.additive() + self.C + self.E


@dataclass(frozen=True)
class FMFit:
    """Plain matrix factor model fit (no main effects)."""

    Ar: np.ndarray
    Ac: np.ndarray
    eigvals_r: np.ndarray
    eigvals_c: np.ndarray
    C: np.ndarray
    E: np.ndarray

    @property
    def lr(self) -> int:
        return self.Ar.shape[1]

    @property
    def lc(self) -> int:
        return self.Ac.shape[1]


def estimate_mean_effects(Y) -> MeanEffects:
    """Moment estimators of the grand mean and the row/column main effects."""
    Y = as_series(Y, min_dim=2)
    row_means = Y.mean(axis=2)  # q^{-1} Y_t 1
    col_means = Y.mean(axis=1)  # p^{-1} 1' Y_t
    mu = row_means.mean(axis=1)
    alpha = row_means - mu[:, None]
    beta = col_means - mu[:, None]
    # exact zero-sum up to one rounding step
    alpha -= alpha.mean(axis=1, keepdims=True)
    beta -= beta.mean(axis=1, keepdims=True)
    return MeanEffects(mu=mu, alpha=alpha, beta=beta)


def detrend(Y) -> np.ndarray:
    """Double-center every frame: ``L_t = M_p Y_t M_q``."""
    return double_center(as_series(Y))


def _kahan_frame_sum(products) -> np.ndarray:
    total = None
    comp = None
    for term in products:
        if total is None:
            total = np.array(term, dtype=float)
            comp = np.zeros_like(total)
            continue
        y = term - comp
        tmp = total + y
        comp = (tmp - total) - y
        total = tmp
    return total


def series_covariances(L) -> tuple[np.ndarray, np.ndarray]:
    """Row and column second-moment matrices ``T^{-1} sum_t L_t L_t'`` and ``T^{-1} sum_t L_t' L_t``."""
    L = as_series(L)
    T = L.shape[0]
    if L.size > COMPENSATED_SUM_THRESHOLD:
        S_row = _kahan_frame_sum(Lt @ Lt.T for Lt in L)
        S_col = _kahan_frame_sum(Lt.T @ Lt for Lt in L)
    else:
        S_row = np.tensordot(L, L, axes=([0, 2], [0, 2]))
        S_col = np.tensordot(L, L, axes=([0, 1], [0, 1]))
    S_row /= T
    S_col /= T
    return 0.5 * (S_row + S_row.T), 0.5 * (S_col + S_col.T)


def estimate_loadings(L, kr: int, kc: int):
    """Leading eigenvectors of the row and column covariances of ``L``.

    Returns
    -------
    Qr, Dr, Qc, Dc
        Orthonormal ``p x kr`` and ``q x kc`` loadings with their eigenvalues
        in descending order.
    """
    L = as_series(L, min_dim=2)
    _, p, q = L.shape
    if not 1 <= kr <= p - 1:
        raise ValueError(f"kr must lie in [1, {p - 1}], got {kr}")
    if not 1 <= kc <= q - 1:
        raise ValueError(f"kc must lie in [1, {q - 1}], got {kc}")
    S_row, S_col = series_covariances(L)
    row = sym_eig_topk(S_row, kr)
    col = sym_eig_topk(S_col, kc)
    Dr = np.clip(row.values, 0.0, None)
    Dc = np.clip(col.values, 0.0, None)
    return row.vectors, Dr, col.vectors, Dc


def _check_loading(Q: np.ndarray, n: int, name: str) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.ndim != 2 or Q.shape[0] != n:
        raise ValueError(f"{name} must have {n} rows, got shape {Q.shape}")
    if Q.shape[1] == 0:
        raise ValueError(f"{name} has no columns")
    if not np.allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-8):
        raise ValueError(f"{name} must have orthonormal columns")
    return Q


def estimate_factors(Y, Qr, Qc):
    """Factor series, common component and residuals given loadings.

    ``FZ_t = Qr' Y_t Qc``, ``C_t = Qr FZ_t Qc'`` and ``E_t = L_t - C_t`` with
    ``L_t`` the double-centered frame.
    """
    Y = as_series(Y)
    _, p, q = Y.shape
    Qr = _check_loading(Qr, p, "Qr")
    Qc = _check_loading(Qc, q, "Qc")
    FZ = Qr.T @ Y @ Qc
    C = Qr @ FZ @ Qc.T
    E = double_center(Y) - C
    return FZ, C, E


def fit_mefm(
    Y,
    kr: Union[int, Literal["auto"]] = "auto",
    kc: Union[int, Literal["auto"]] = "auto",
    *,
    c_xi: float = 0.2,
) -> MEFMFit:
    """Fit the main effects factor model.

    Parameters
    ----------
    Y : array_like, shape (T, p, q)
        Observed matrix series.
    kr, kc : int or "auto"
        Core ranks. With ``"auto"`` the perturbed eigenvalue-ratio estimator
        picks them (``c_xi`` is passed through).

    Notes
    -----
    When the double-centered series is identically zero the fit is flagged
    ``degenerate`` (with a :class:`DegenerateFitWarning`) and the common
    component is zero.
    """
    Y = as_series(Y, min_dim=2)
    effects = estimate_mean_effects(Y)
    L = double_center(Y)

    selection = None
    if kr == "auto" or kc == "auto":
        from .rank import select_ranks

        selection = select_ranks(L, c_xi=c_xi)
        kr = selection.kr_hat if kr == "auto" else kr
        kc = selection.kc_hat if kc == "auto" else kc

    Qr, Dr, Qc, Dc = estimate_loadings(L, int(kr), int(kc))
    scale = max(np.max(np.abs(Y)), 1.0)
    degenerate = bool(Dr[0] <= 1e-24 * scale**2 or Dc[0] <= 1e-24 * scale**2)
    if degenerate:
        warnings.warn(
            "double-centered series is (numerically) zero; no common component",
            DegenerateFitWarning,
            stacklevel=2,
        )
    # L is its own double-centering, so passing it keeps the factors inside
    # the centered space even when a loading column hits a null eigenvalue
    FZ, C, E = estimate_factors(L, Qr, Qc)
    return MEFMFit(
        effects=effects,
        L=L,
        Qr=Qr,
        Qc=Qc,
        Dr=Dr,
        Dc=Dc,
        FZ=FZ,
        C=C,
        E=E,
        degenerate=degenerate,
        rank_selection=selection,
    )


def fit_fm(Y, lr: int, lc: int) -> FMFit:
    """Fit a plain matrix factor model with ranks ``(lr, lc)``.

    The loadings are the leading eigenvectors of ``sum_t Y_t Y_t'`` and
    ``sum_t Y_t' Y_t`` on the raw (uncentered) data.
    """
    Y = as_series(Y)
    _, p, q = Y.shape
    if not 1 <= lr <= p:
        raise ValueError(f"lr must lie in [1, {p}], got {lr}")
    if not 1 <= lc <= q:
        raise ValueError(f"lc must lie in [1, {q}], got {lc}")
    S_row, S_col = series_covariances(Y)
    row = sym_eig_topk(S_row, lr)
    col = sym_eig_topk(S_col, lc)
    Ar, Ac = row.vectors, col.vectors
    C = Ar @ (Ar.T @ Y @ Ac) @ Ac.T
    return FMFit(
        Ar=Ar,
        Ac=Ac,
        eigvals_r=row.values,
        eigvals_c=col.values,
        C=C,
        E=Y - C,
    )


def fm_to_mefm(C) -> tuple[MeanEffects, np.ndarray]:
    """Rewrite an uncentered common component in main-effects form.

    Returns the implied effects and the centered component ``M_p C_t M_q``;
    the four parts add back up to ``C_t``.
    """
    C = as_series(C)
    row_means = C.mean(axis=2)
    col_means = C.mean(axis=1)
    mu = row_means.mean(axis=1)
    alpha = row_means - row_means.mean(axis=1, keepdims=True)
    beta = col_means - col_means.mean(axis=1, keepdims=True)
    return MeanEffects(mu=mu, alpha=alpha, beta=beta), double_center(C)
