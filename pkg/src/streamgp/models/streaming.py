"""Streaming sparse GP: fold each new batch into a running sparse posterior.

The previous posterior enters the new bound only through the ratio
``q_old(a) / p(a | theta_old)``, a Gaussian factor on the function values at
the old pseudo-inputs. The old data are never revisited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kernels import Dataset, Hyperparameters, kernel_diag, kernel_matrix
from ..linalg import robust_cholesky
from ..optimize import OptimizerConfig
from .base import Objective, SparseState, clamp_eigenvalues
from .sparse import chain_bound, collapsed_bound, fit_vsgp, vsgp_optimal_q
from .training import fit_parameters


@dataclass(frozen=True)
class SSGPConfig:
    """Per-update settings.

    ``num_pseudo=None`` keeps the previous pseudo-point count.
    """

    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    num_pseudo: int | None = None
    fit_hyperparameters: bool = True
    fit_pseudo_inputs: bool = True
    seed: int = 0
    clamp: float = 1e-8


def _bound(state_old: SparseState, batch: Dataset, Z_new, hp_new: Hyperparameters, clamp):
    state = state_old.with_site(clamp)
    Za = state.pseudo_inputs
    Z = np.asarray(Z_new, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != hp_new.dim or Z.shape[0] < 1:
        raise ValueError(f"pseudo-inputs must be (M>=1, {hp_new.dim}), got {Z.shape}")
    X = batch.inputs if len(batch) else np.zeros((0, hp_new.dim))
    Kbb = kernel_matrix(Z, Z, hp_new)
    Lb = robust_cholesky(Kbb)
    Kfb = kernel_matrix(X, Z, hp_new)
    Kab = kernel_matrix(Za, Z, hp_new)
    Kaa = kernel_matrix(Za, Za, hp_new)
    bound = collapsed_bound(
        Kbb, Lb, Kfb, kernel_diag(X, hp_new), 1.0 / hp_new.noise_variance, batch.targets,
        Kab, Kaa, clamp_eigenvalues(state.site_precision, clamp), state.site_shift,
        state.site_log_scale,
    )
    return bound, X, Z, Za, Kbb, Kfb, Kab


def ssgp_elbo(state_old: SparseState, batch: Dataset, Z_new, hp_new: Hyperparameters,
              clamp: float = 1e-8) -> Objective:
    """Streaming lower bound on ``log p(y_new | y_old)``.

    The new batch enters through its exact Gaussian likelihood, the old data
    through ``q_old(a) / p(a | theta_old)`` built from ``state_old`` under its
    own snapshot of the hyperparameters. The gradient covers ``hp_new`` and
    ``Z_new``.
    """
    bound, X, Z, Za, Kbb, Kfb, Kab = _bound(state_old, batch, Z_new, hp_new, clamp)
    grad = chain_bound(bound, X, Z, hp_new, Kbb, Kfb, Za, Kab)
    return Objective(bound.value, grad)


def ssgp_optimal_q(state_old: SparseState, batch: Dataset, Z_new, hp_new: Hyperparameters,
                   clamp: float = 1e-8) -> SparseState:
    """Closed-form maximizer ``q(b)`` of the streaming bound."""
    bound, _, Z, _, Kbb, _, _ = _bound(state_old, batch, Z_new, hp_new, clamp)
    return SparseState(Z, bound.q_mean, bound.q_cov, hp_new, Kbb,
                       bound.site_precision, bound.site_shift, bound.site_log_scale)


def grow_pseudo_inputs(Z, candidates, count: int, hp: Hyperparameters, seed: int = 0):
    """Append ``count`` candidates, greedily taking the one farthest from the set.

    Distances are measured after dividing each coordinate by its lengthscale.
    If the candidates run out, the remaining points are drawn uniformly from
    the unit square (the normalized field domain).
    """
    dim = hp.dim
    Z = np.zeros((0, dim)) if Z is None else np.asarray(Z, dtype=float).reshape(-1, dim)
    candidates = np.asarray(candidates, dtype=float).reshape(-1, dim)
    if count <= 0:
        return Z
    ell = hp.lengthscales
    cand = candidates / ell
    chosen = []
    if Z.shape[0]:
        dist = np.min(np.sum(((cand[:, None, :] - (Z / ell)[None]) ** 2), axis=2), axis=1)
    else:
        dist = np.full(cand.shape[0], np.inf)
    available = np.ones(cand.shape[0], dtype=bool)
    while len(chosen) < count and available.any():
        score = np.where(available, dist, -np.inf)
        i = int(np.argmax(score))
        if Z.shape[0] + len(chosen) > 0 and score[i] <= 1e-12:
            break
        chosen.append(i)
        available[i] = False
        dist = np.minimum(dist, np.sum((cand - cand[i]) ** 2, axis=1))
    new = candidates[chosen]
    missing = count - len(chosen)
    if missing > 0:
        rng = np.random.default_rng(seed)
        new = np.vstack([new, rng.uniform(0.0, 1.0, size=(missing, dim))])
    return np.vstack([Z, new])


def ssgp_init(batch: Dataset, Z0, hp0: Hyperparameters, config: SSGPConfig | None = None,
              return_fit: bool = False):
    """First batch: fit the variational sparse GP from ``(hp0, Z0)``."""
    config = config or SSGPConfig()
    if len(batch) == 0:
        raise ValueError("the first batch must contain data")
    fit = fit_vsgp(batch, Z0, hp0, config.optimizer,
                   config.fit_hyperparameters, config.fit_pseudo_inputs)
    state = vsgp_optimal_q(batch, fit.pseudo_inputs, fit.hp)
    return (state, fit) if return_fit else state


def ssgp_update(state_old: SparseState, batch: Dataset, config: SSGPConfig | None = None,
                return_fit: bool = False):
    """Fold ``batch`` into ``state_old``.

    Hyperparameters and pseudo-inputs start from the previous optimum; extra
    pseudo-inputs, when ``config.num_pseudo`` asks for more, are taken from
    the new batch. Returns the new state and the optimized bound.
    """
    config = config or SSGPConfig()
    state_old = state_old.with_site(config.clamp)
    hp0 = state_old.hp_snapshot
    Z0 = state_old.pseudo_inputs
    target = config.num_pseudo or Z0.shape[0]
    if target < Z0.shape[0]:
        raise ValueError(f"cannot shrink from {Z0.shape[0]} to {target} pseudo-inputs")
    if target > Z0.shape[0]:
        Z0 = grow_pseudo_inputs(Z0, batch.inputs, target - Z0.shape[0], hp0, config.seed)
    fit = fit_parameters(
        lambda hp, Z: ssgp_elbo(state_old, batch, Z, hp, config.clamp),
        hp0, Z0, config.optimizer, config.fit_hyperparameters, config.fit_pseudo_inputs,
    )
    state = ssgp_optimal_q(state_old, batch, fit.pseudo_inputs, fit.hp, config.clamp)
    if return_fit:
        return state, fit.objective, fit
    return state, fit.objective
