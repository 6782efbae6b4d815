"""Dense linear algebra helpers shared by the estimators.

Everything here works on plain ``numpy`` arrays and is free of side effects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenTopK",
    "double_center",
    "fix_signs",
    "projector",
    "space_distance",
    "spectral_norm",
    "sym_eig_topk",
]


@dataclass(frozen=True)
class EigenTopK:
    """Leading eigenpairs of a symmetric matrix.

    Attributes
    ----------
    values : ndarray, shape (k,)
        Eigenvalues in descending order.
    vectors : ndarray, shape (n, k)
        Orthonormal eigenvectors; column ``i`` pairs with ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[0]


def double_center(Y: np.ndarray) -> np.ndarray:
    """Remove row means, column means and add back the grand mean.

    Equivalent to ``M_p @ Y @ M_q`` with ``M_m = I - 11'/m`` but never forms
    the centering matrices. A stack of matrices with shape ``(T, p, q)`` is
    centered frame by frame.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim < 2:
        raise ValueError("double_center expects a matrix or a stack of matrices")
    row_means = Y.mean(axis=-1, keepdims=True)
    col_means = Y.mean(axis=-2, keepdims=True)
    grand = row_means.mean(axis=-2, keepdims=True)
    return Y - row_means - col_means + grand


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive.

    Ties in magnitude go to the lowest row index (``argmax`` semantics).
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig_topk(S: np.ndarray, k: int) -> EigenTopK:
    """Top-``k`` eigenpairs of a symmetric matrix, descending, sign-fixed.

    The full decomposition is computed with ``numpy.linalg.eigh`` and then
    truncated; the sizes handled here are at most a few hundred.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    n = S.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.max(np.abs(S)), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    values, vectors = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(values, kind="stable")[::-1][:k]
    return EigenTopK(values=values[order], vectors=fix_signs(vectors[:, order]))


def projector(Q: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``Q (Q'Q)^{-1} Q'`` onto the column space of ``Q``."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.shape[1] == 0 or np.linalg.matrix_rank(Q) < Q.shape[1]:
        raise ValueError("matrix does not have full column rank")
    return Q @ np.linalg.solve(Q.T @ Q, Q.T)


def spectral_norm(A: np.ndarray) -> float:
    """Largest singular value, via the top eigenvalue of ``A'A``."""
    A = np.asarray(A, dtype=float)
    gram = A.T @ A
    top = np.linalg.eigvalsh(0.5 * (gram + gram.T))[-1]
    return float(np.sqrt(max(top, 0.0)))


def space_distance(Q1: np.ndarray, Q2: np.ndarray) -> float:
    """Column space distance ``||P1 - P2||_2`` between two full-rank matrices.

    Zero exactly when the spans agree; one for orthogonal spans of equal
    dimension.
    """
    P1 = projector(Q1)
    P2 = projector(Q2)
    if P1.shape != P2.shape:
        raise ValueError("matrices must have the same number of rows")
    return spectral_norm(P1 - P2)
