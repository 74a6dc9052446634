"""Fitting hyperparameters (and pseudo-inputs) by minimizing a negated objective."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError

from ..kernels import Hyperparameters
from ..linalg import NumericalError
from ..optimize import OptimizationResult, OptimizerConfig, minimize
from .base import Objective

logger = logging.getLogger(__name__)

# log-hyperparameters outside this range are treated as infeasible trial points
LOG_PARAM_LIMIT = 25.0


class OptimizationWarning(UserWarning):
    """The optimizer stopped without meeting its gradient tolerance."""


@dataclass(frozen=True)
class FitResult:
    hp: Hyperparameters
    pseudo_inputs: np.ndarray | None
    objective: Objective
    optimization: OptimizationResult

    @property
    def converged(self) -> bool:
        return self.optimization.converged


def fit_parameters(
    objective: Callable[[Hyperparameters, np.ndarray | None], Objective],
    hp0: Hyperparameters,
    Z0: np.ndarray | None = None,
    config: OptimizerConfig | None = None,
    fit_hp: bool = True,
    fit_pseudo: bool = True,
) -> FitResult:
    """Maximize ``objective(hp, Z)`` jointly over log-hyperparameters and ``Z``.

    Parameters that are not being fitted stay at their initial values. The
    optimizer sees one flat vector: log-hyperparameters then ``Z.ravel()``.
    Trial points with a lengthscale above ``config.max_lengthscale`` are
    rejected as infeasible.
    """
    config = config or OptimizerConfig()
    n_hp = hp0.size
    start = hp0.to_vector()
    if Z0 is not None:
        Z0 = np.asarray(Z0, dtype=float)
        start = np.concatenate([start, Z0.ravel()])
    mask = np.zeros(start.size, dtype=bool)
    mask[:n_hp] = fit_hp
    mask[n_hp:] = fit_pseudo

    def unpack(free):
        full = start.copy()
        full[mask] = free
        hp = Hyperparameters.from_vector(full[:n_hp])
        Z = full[n_hp:].reshape(Z0.shape) if Z0 is not None else None
        return hp, Z

    ell = slice(1, 1 + hp0.dim)
    log_ell_max = np.inf if config.max_lengthscale is None else np.log(config.max_lengthscale)
    if fit_hp:
        start[ell] = np.minimum(start[ell], log_ell_max)

    def negated(free):
        if np.any(np.abs(free[: int(mask[:n_hp].sum())]) > LOG_PARAM_LIMIT):
            return np.inf, np.full(free.shape, np.nan)
        if fit_hp and np.any(free[ell] > log_ell_max):
            return np.inf, np.full(free.shape, np.nan)
        try:
            with np.errstate(all="ignore"):
                hp, Z = unpack(free)
                obj = objective(hp, Z)
        except (NumericalError, LinAlgError, ValueError, FloatingPointError) as exc:
            logger.debug("objective evaluation failed: %s", exc)
            return np.inf, np.full(free.shape, np.nan)
        return -obj.value, -obj.gradient[mask]

    if not mask.any():
        result = minimize(negated, start[mask], OptimizerConfig(max_iterations=0))
    else:
        result = minimize(negated, start[mask], config)
    hp, Z = unpack(result.best_point)
    if not result.converged and config.max_iterations > 0 and mask.any():
        warnings.warn(
            f"optimizer stopped with {result.termination_reason.value} after "
            f"{result.iterations_used} iterations",
            OptimizationWarning,
            stacklevel=2,
        )
    full_gradient = np.zeros(start.size)
    full_gradient[mask] = -result.best_gradient
    return FitResult(hp, Z, Objective(-result.best_value, full_gradient), result)
