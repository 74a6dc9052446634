"""Exact, windowed, variational sparse, FITC and streaming sparse GP regression."""

from .base import Objective, Prediction, SparseState
from .exact import (GPRState, fit_gpr, gpr_log_marginal_likelihood, gpr_predict,
                    gpr_window_update)
from .sparse import (fit_spgp, fit_vsgp, sparse_predict, spgp_log_marginal_likelihood,
                     spgp_posterior, vsgp_elbo, vsgp_optimal_q)
from .streaming import (SSGPConfig, grow_pseudo_inputs, ssgp_elbo, ssgp_init,
                        ssgp_optimal_q, ssgp_update)
from .training import FitResult, OptimizationWarning, fit_parameters

__all__ = [
    "FitResult", "GPRState", "Objective", "OptimizationWarning", "Prediction", "SSGPConfig",
    "SparseState", "fit_gpr", "fit_parameters", "fit_spgp", "fit_vsgp",
    "gpr_log_marginal_likelihood", "gpr_predict", "gpr_window_update", "grow_pseudo_inputs",
    "sparse_predict", "spgp_log_marginal_likelihood", "spgp_posterior", "ssgp_elbo",
    "ssgp_init", "ssgp_optimal_q", "ssgp_update", "vsgp_elbo", "vsgp_optimal_q",
]
