"""Cholesky factorization with escalating jitter and related helpers."""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

JITTER_START = 1e-8
JITTER_STOP = 1e-2


class NumericalError(RuntimeError):
    """Raised when a matrix cannot be factorized even with maximal jitter."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


def robust_cholesky(A: np.ndarray, return_jitter: bool = False):
    """Lower Cholesky factor of a symmetric matrix, adding jitter on failure.

    The matrix is first factorized as given. If that fails, ``jitter * I`` is
    added with ``jitter`` starting at ``1e-8 * mean(diag(A))`` and growing by
    a factor of ten up to ``1e-2 * mean(diag(A))``.

    Parameters
    ----------
    A : (M, M) array
        Symmetric matrix with finite entries.
    return_jitter : bool
        Also return the jitter that was finally used (0.0 if none).

    Raises
    ------
    NumericalError
        If the factorization fails at the largest jitter level.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix has non-finite entries", 0.0)
    n = A.shape[0]
    if n == 0:
        L = np.zeros((0, 0))
        return (L, 0.0) if return_jitter else L
    try:
        L = cholesky(A, lower=True, check_finite=False)
        return (L, 0.0) if return_jitter else L
    except LinAlgError:
        pass
    scale = float(np.mean(np.diag(A)))
    if not scale > 0:
        scale = 1.0
    jitter = JITTER_START * scale
    stop = JITTER_STOP * scale * (1 + 1e-9)
    while jitter <= stop:
        try:
            L = cholesky(A + jitter * np.eye(n), lower=True, check_finite=False)
            return (L, jitter) if return_jitter else L
        except LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"Cholesky failed for {n}x{n} matrix with jitter up to {jitter / 10.0:.3g}",
        jitter / 10.0,
    )


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``L X = B`` for lower-triangular ``L``."""
    return solve_triangular(L, B, lower=True, check_finite=False)


def solve_upper_t(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``L^T X = B`` for lower-triangular ``L``."""
    return solve_triangular(L, B, lower=True, trans="T", check_finite=False)


def chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) X = B``."""
    return cho_solve((L, True), B, check_finite=False)


def chol_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of ``L L^T``, symmetrized."""
    inv = cho_solve((L, True), np.eye(L.shape[0]), check_finite=False)
    return 0.5 * (inv + inv.T)


def chol_logdet(L: np.ndarray) -> float:
    """``log|L L^T|``."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
