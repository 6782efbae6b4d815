"""Residual-based test of a plain factor model against the main effects model.

Each frame yields the largest row-wise (and column-wise) mean squared
residual under both fits. The main-effects residual maxima ``x_t`` give a
reference distribution whose ``theta`` quantile serves as the threshold for
the factor-model maxima ``y_t``; the proportion of frames at or above it is
the rejection rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .model import MEFMFit, FMFit, as_series, fit_fm, fit_mefm
from .rank import RankSelection, select_ranks

__all__ = [
    "TestResult",
    "empirical_cdf",
    "empirical_quantile",
    "rejection_rate",
    "residual_max_stats",
    "run_fm_vs_mefm_test",
]


@dataclass(frozen=True)
class TestResult:
    theta: float
    x_alpha: np.ndarray
    y_alpha: np.ndarray
    x_beta: np.ndarray
    y_beta: np.ndarray
    q_x_alpha: float
    q_x_beta: float
    reject_alpha: float
    reject_beta: float
    kr: int
    kc: int
    lr: int
    lc: int
    rank_selection: Optional[RankSelection] = None

    __test__ = False  # not a pytest class


def residual_max_stats(E) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame ``max_i q^{-1}(E_t E_t')_ii`` and ``max_j p^{-1}(E_t' E_t)_jj``."""
    E = as_series(E)
    _, p, q = E.shape
    sq = E**2
    return sq.sum(axis=2).max(axis=1) / q, sq.sum(axis=1).max(axis=1) / p


def empirical_cdf(samples, c: float) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(np.count_nonzero(samples <= c)) / samples.size


def empirical_quantile(samples, theta: float) -> float:
    """Generalised inverse ``inf{c : F(c) >= theta}`` of the empirical CDF.

    No interpolation: the result is always one of the samples.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    cdf = np.searchsorted(x, x, side="right") / n
    return float(x[np.argmax(cdf >= theta)])


def rejection_rate(y, threshold: float) -> float:
    """Fraction of ``y`` at or above ``threshold``."""
    y = np.asarray(y, dtype=float)
    return float(np.count_nonzero(y >= threshold)) / y.size


def run_fm_vs_mefm_test(
    Y,
    theta: float = 0.95,
    ranks: Optional[Tuple[int, int]] = None,
    fm_ranks: Optional[Tuple[int, int]] = None,
    *,
    c_xi: float = 0.2,
    mefm_fit: Optional[MEFMFit] = None,
    fm_fit: Optional[FMFit] = None,
) -> TestResult:
    """Test whether a plain factor model suffices for ``Y``.

    Parameters
    ----------
    Y : array_like, shape (T, p, q)
    theta : float
        Quantile level; the nominal size is ``1 - theta``.
    ranks : (kr, kc), optional
        Core ranks for the main effects fit; estimated when omitted.
    fm_ranks : (lr, lc), optional
        Ranks of the plain factor model fit, by default ``(kr + 1, kc + 1)``.
    mefm_fit, fm_fit : optional
        Precomputed fits to reuse.
    """
    Y = as_series(Y, min_dim=2)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    selection = None
    if mefm_fit is not None:
        kr, kc = mefm_fit.kr, mefm_fit.kc
        selection = mefm_fit.rank_selection
    elif ranks is None:
        from .linalg import double_center

        selection = select_ranks(double_center(Y), c_xi=c_xi)
        kr, kc = selection.ranks
    else:
        kr, kc = ranks
    if mefm_fit is None:
        mefm_fit = fit_mefm(Y, kr, kc)

    if fm_fit is not None:
        lr, lc = fm_fit.lr, fm_fit.lc
    else:
        _, p, q = Y.shape
        lr, lc = fm_ranks if fm_ranks is not None else (min(kr + 1, p), min(kc + 1, q))
        fm_fit = fit_fm(Y, lr, lc)

    x_alpha, x_beta = residual_max_stats(mefm_fit.E)
    y_alpha, y_beta = residual_max_stats(fm_fit.E)
    q_a = empirical_quantile(x_alpha, theta)
    q_b = empirical_quantile(x_beta, theta)
    return TestResult(
        theta=theta,
        x_alpha=x_alpha,
        y_alpha=y_alpha,
        x_beta=x_beta,
        y_beta=y_beta,
        q_x_alpha=q_a,
        q_x_beta=q_b,
        reject_alpha=rejection_rate(y_alpha, q_a),
        reject_beta=rejection_rate(y_beta, q_b),
        kr=int(kr),
        kc=int(kc),
        lr=int(lr),
        lc=int(lc),
        rank_selection=selection,
    )
