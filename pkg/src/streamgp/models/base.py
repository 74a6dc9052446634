"""Value types shared by the regression models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kernels import Hyperparameters, kernel_matrix
from ..linalg import chol_inverse, robust_cholesky, solve_lower

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Prediction:
    """Posterior marginals at a set of query points."""

    mean: np.ndarray
    variance_f: np.ndarray
    variance_y: np.ndarray


@dataclass(frozen=True)
class Objective:
    """Objective value with its gradient over the free parameters.

    The gradient is laid out as ``[log sf2, log l_1..l_D, log sn2]`` followed
    by the flattened pseudo-inputs when the model has any.
    """

    value: float
    gradient: np.ndarray


def make_prediction(mean, variance_f, hp: Hyperparameters) -> Prediction:
    variance_f = np.maximum(variance_f, 0.0)
    return Prediction(mean, variance_f, variance_f + hp.noise_variance)


@dataclass(frozen=True, eq=False)
class SparseState:
    """Pseudo-inputs with a Gaussian ``q(u) = N(q_mean, q_cov)``.

    ``prior_cached`` is ``K(Z, Z)`` under ``hp_snapshot``. The ``site_*``
    fields describe the ratio ``q(u) / p(u)`` as an unnormalized Gaussian
    factor ``exp(site_log_scale - u'P u / 2 + u' h)``; they are filled in
    directly when the state comes from a closed-form optimum and are derived
    from the moments otherwise.
    """

    pseudo_inputs: np.ndarray
    q_mean: np.ndarray
    q_cov: np.ndarray
    hp_snapshot: Hyperparameters
    prior_cached: np.ndarray
    site_precision: np.ndarray | None = field(default=None, repr=False)
    site_shift: np.ndarray | None = field(default=None, repr=False)
    site_log_scale: float | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("pseudo_inputs", "q_mean", "q_cov", "prior_cached",
                     "site_precision", "site_shift"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def num_pseudo(self) -> int:
        return self.pseudo_inputs.shape[0]

    @classmethod
    def prior(cls, Z, hp: Hyperparameters) -> "SparseState":
        """The state that summarizes no data at all."""
        Z = np.asarray(Z, dtype=float)
        K = kernel_matrix(Z, Z, hp)
        M = Z.shape[0]
        return cls(Z, np.zeros(M), K, hp, K, np.zeros((M, M)), np.zeros(M), 0.0)

    def with_site(self, clamp: float = 1e-8) -> "SparseState":
        """Return a copy whose site fields are populated.

        When they are missing the precision is ``inv(S) - inv(K)``; any
        eigenvalue below ``-clamp`` is raised to ``clamp`` because the moments
        may describe a ``q`` that is wider than the prior along some direction.
        """
        if self.site_precision is not None:
            return self
        L_S = robust_cholesky(self.q_cov)
        L_K = robust_cholesky(self.prior_cached)
        precision = chol_inverse(L_S) - chol_inverse(L_K)
        precision = clamp_eigenvalues(0.5 * (precision + precision.T), clamp)
        shift = chol_inverse(L_S) @ self.q_mean
        # log|inv(S) K| / 2 - m' inv(S) m / 2
        logdet_ratio = 2.0 * (np.sum(np.log(np.diag(L_K))) - np.sum(np.log(np.diag(L_S))))
        white = solve_lower(L_S, self.q_mean)
        log_scale = 0.5 * logdet_ratio - 0.5 * float(white @ white)
        return SparseState(self.pseudo_inputs, self.q_mean, self.q_cov, self.hp_snapshot,
                           self.prior_cached, precision, shift, log_scale)


def clamp_eigenvalues(A: np.ndarray, clamp: float = 1e-8) -> np.ndarray:
    """Raise eigenvalues below ``-clamp`` of a symmetric matrix to ``clamp``."""
    if A.size == 0:
        return A
    w, U = np.linalg.eigh(A)
    if np.all(w >= -clamp):
        return A
    w = np.where(w < -clamp, clamp, w)
    return (U * w) @ U.T
