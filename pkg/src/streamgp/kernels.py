"""Squared-exponential ARD covariance and its derivatives.

All hyperparameters are stored as logarithms so optimizers can work in an
unconstrained space. Coordinates are expected in normalized field units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Hyperparameters:
    """Log-parameterized SE-ARD kernel amplitude, lengthscales and noise."""

    log_signal_variance: float
    log_lengthscales: tuple[float, ...]
    log_noise_variance: float

    def __post_init__(self):
        object.__setattr__(self, "log_signal_variance", float(self.log_signal_variance))
        object.__setattr__(
            self, "log_lengthscales", tuple(float(v) for v in np.ravel(self.log_lengthscales))
        )
        object.__setattr__(self, "log_noise_variance", float(self.log_noise_variance))
        if not self.log_lengthscales:
            raise ValueError("at least one lengthscale is required")
        values = np.exp(self.to_vector())
        if not np.all(np.isfinite(values)) or not np.all(values > 0):
            raise ValueError(f"hyperparameters must be positive and finite, got {values}")

    @classmethod
    def from_values(cls, signal_variance, lengthscales, noise_variance) -> "Hyperparameters":
        return cls(
            np.log(signal_variance),
            tuple(np.log(np.atleast_1d(np.asarray(lengthscales, dtype=float)))),
            np.log(noise_variance),
        )

    @classmethod
    def from_vector(cls, theta) -> "Hyperparameters":
        """Inverse of :meth:`to_vector`."""
        theta = np.asarray(theta, dtype=float)
        return cls(theta[0], tuple(theta[1:-1]), theta[-1])

    def to_vector(self) -> np.ndarray:
        """``[log sf2, log l_1 .. log l_D, log sn2]``."""
        return np.array(
            [self.log_signal_variance, *self.log_lengthscales, self.log_noise_variance]
        )

    @property
    def dim(self) -> int:
        return len(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return float(np.exp(self.log_signal_variance))

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_lengthscales))

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.log_noise_variance))

    @property
    def size(self) -> int:
        return self.dim + 2


@dataclass(frozen=True)
class Dataset:
    """Training inputs (N x D) with their noisy observations (N,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float, ndmin=2)
        y = np.array(self.targets, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @classmethod
    def empty(cls, dim: int) -> "Dataset":
        return cls(np.zeros((0, dim)), np.zeros(0))

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.vstack([self.inputs, other.inputs]),
            np.concatenate([self.targets, other.targets]),
        )

    def tail(self, count: int) -> "Dataset":
        """The last ``count`` pairs in arrival order."""
        start = max(len(self) - count, 0)
        return Dataset(self.inputs[start:], self.targets[start:])


def _as_points(X, dim: int, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"{name} has shape {X.shape}, expected (*, {dim})")
    return X


def _scaled_differences(X1, X2, hp: Hyperparameters):
    X1 = _as_points(X1, hp.dim, "X1")
    X2 = _as_points(X2, hp.dim, "X2")
    ell = hp.lengthscales
    return (X1[:, None, :] - X2[None, :, :]) / ell


def kernel_eval(a, b, hp: Hyperparameters) -> float:
    """SE-ARD covariance between two points."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != (hp.dim,) or b.shape != (hp.dim,):
        raise ValueError(f"points of dimension {a.size}, {b.size} for a {hp.dim}-D kernel")
    r = (a - b) / hp.lengthscales
    return hp.signal_variance * float(np.exp(-0.5 * np.dot(r, r)))


def kernel_matrix(X1, X2, hp: Hyperparameters) -> np.ndarray:
    """Covariance matrix with entries ``k(X1[i], X2[j])``."""
    X1 = _as_points(X1, hp.dim, "X1")
    X2 = _as_points(X2, hp.dim, "X2")
    ell = hp.lengthscales
    A = X1 / ell
    B = X2 / ell
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return hp.signal_variance * np.exp(-0.5 * sq)


def kernel_diag(X, hp: Hyperparameters) -> np.ndarray:
    """Diagonal of ``kernel_matrix(X, X, hp)``."""
    X = _as_points(X, hp.dim, "X")
    return np.full(X.shape[0], hp.signal_variance)


def kernel_gradients(X1, X2, hp: Hyperparameters) -> list[np.ndarray]:
    """Derivatives of the kernel matrix with respect to each log-hyperparameter.

    Returns ``[dK/dlog sf2, dK/dlog l_1, ..., dK/dlog l_D]``. The noise
    variance is not part of the kernel and is handled by the models.
    """
    R = _scaled_differences(X1, X2, hp)
    K = hp.signal_variance * np.exp(-0.5 * np.sum(R**2, axis=2))
    return [K] + [K * R[:, :, d] ** 2 for d in range(hp.dim)]


def kernel_vjp(X1, X2, hp: Hyperparameters, W: np.ndarray, K: np.ndarray | None = None):
    """Contract ``W`` against the kernel-matrix derivatives.

    Computes ``sum_ij W_ij dK_ij/dp`` for every kernel hyperparameter and every
    input coordinate without materializing the per-parameter matrices.

    Returns
    -------
    g_hp : (1 + D,) array
        Gradient with respect to ``log sf2`` and each ``log l_d``.
    g_X1 : (N1, D) array
    g_X2 : (N2, D) array
    """
    X1 = _as_points(X1, hp.dim, "X1")
    X2 = _as_points(X2, hp.dim, "X2")
    if K is None:
        K = kernel_matrix(X1, X2, hp)
    WK = W * K
    ell2 = hp.lengthscales**2
    g_hp = np.empty(hp.dim + 1)
    g_hp[0] = np.sum(WK)
    g_X1 = np.empty(X1.shape)
    g_X2 = np.empty(X2.shape)
    row = WK.sum(axis=1)
    col = WK.sum(axis=0)
    for d in range(hp.dim):
        x1 = X1[:, d]
        x2 = X2[:, d]
        # sum_ij WK_ij (x1_i - x2_j)^2, expanded to avoid an N1 x N2 x D tensor
        g_hp[d + 1] = (row @ x1**2 - 2.0 * x1 @ WK @ x2 + col @ x2**2) / ell2[d]
        cross1 = WK @ x2
        cross2 = WK.T @ x1
        g_X1[:, d] = -(row * x1 - cross1) / ell2[d]
        g_X2[:, d] = (cross2 - col * x2) / ell2[d]
    return g_hp, g_X1, g_X2
