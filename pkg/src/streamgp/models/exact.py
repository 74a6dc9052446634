"""Exact GP regression and its sliding-window variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import Dataset, Hyperparameters, kernel_diag, kernel_matrix, kernel_vjp
from ..linalg import chol_inverse, chol_solve, robust_cholesky, solve_lower
from .base import LOG_2PI, Objective, Prediction, make_prediction
from .training import FitResult, fit_parameters


@dataclass(frozen=True)
class GPRState:
    """Retained training data and the hyperparameters they are modelled with."""

    data: Dataset
    hp: Hyperparameters
    seen: int = 0


def _noisy_factor(data: Dataset, hp: Hyperparameters):
    K = kernel_matrix(data.inputs, data.inputs, hp)
    K[np.diag_indices_from(K)] += hp.noise_variance
    return K, robust_cholesky(K)


def gpr_log_marginal_likelihood(data: Dataset, hp: Hyperparameters) -> Objective:
    """Log marginal likelihood with its gradient over the log-hyperparameters."""
    n = len(data)
    if n < 1:
        raise ValueError("need at least one observation")
    X, y = data.inputs, data.targets
    _, L = _noisy_factor(data, hp)
    alpha = chol_solve(L, y)
    value = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * n * LOG_2PI
    )
    W = 0.5 * (np.outer(alpha, alpha) - chol_inverse(L))
    g_kernel, _, _ = kernel_vjp(X, X, hp, W)
    g_noise = float(np.trace(W)) * hp.noise_variance
    return Objective(value, np.concatenate([g_kernel, [g_noise]]))


def gpr_predict(data: Dataset, hp: Hyperparameters, queries) -> Prediction:
    """Posterior mean and marginal variances at ``queries``."""
    if len(data) < 1:
        raise ValueError("no training data")
    queries = np.asarray(queries, dtype=float)
    _, L = _noisy_factor(data, hp)
    Kqx = kernel_matrix(queries, data.inputs, hp)
    mean = Kqx @ chol_solve(L, data.targets)
    V = solve_lower(L, Kqx.T)
    var = kernel_diag(queries, hp) - np.sum(V**2, axis=0)
    return make_prediction(mean, var, hp)


def gpr_window_update(state: GPRState, batch: Dataset, window: int | None = 500) -> GPRState:
    """Append ``batch`` and keep only the most recent ``window`` pairs.

    ``window=None`` keeps everything (plain GPR).
    """
    if window is not None and window < len(batch):
        raise ValueError(f"window {window} is smaller than the batch ({len(batch)})")
    data = state.data.concat(batch)
    if window is not None:
        data = data.tail(window)
    return GPRState(data, state.hp, state.seen + len(batch))


def fit_gpr(data: Dataset, hp0: Hyperparameters, config=None) -> FitResult:
    """Maximize the log marginal likelihood starting from ``hp0``."""
    return fit_parameters(lambda hp, _: gpr_log_marginal_likelihood(data, hp), hp0, None, config)
