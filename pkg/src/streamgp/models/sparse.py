"""Variational (collapsed-bound) and FITC sparse GPs.

Both models share the shape of their posterior, ``q(u) = N(m, S)`` at the
pseudo-inputs composed with the conditional prior, so prediction goes
through :func:`sparse_predict` for either one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import Dataset, Hyperparameters, kernel_diag, kernel_matrix, kernel_vjp
from ..linalg import chol_inverse, robust_cholesky, solve_lower, solve_upper_t
from .base import LOG_2PI, Objective, Prediction, SparseState, make_prediction
from .training import FitResult, fit_parameters


@dataclass
class _Bound:
    """Value, matrix-level gradients and optimal ``q`` of a collapsed bound."""

    value: float
    d_Kbb: np.ndarray
    d_Kfb: np.ndarray
    d_kdiag: float
    d_beta: float
    d_Kab: np.ndarray | None
    d_Kaa: np.ndarray | None
    q_mean: np.ndarray
    q_cov: np.ndarray
    site_precision: np.ndarray
    site_shift: np.ndarray
    site_log_scale: float


def collapsed_bound(Kbb, Lb, Kfb, kdiag, beta, y,
                    Kab=None, Kaa=None, prec_a=None, shift_a=None, const_a=0.0) -> _Bound:
    """Collapsed variational bound with an optional Gaussian factor on ``a``.

    The data ``y`` are observed through ``f = K_fb inv(K_bb) b + noise`` with
    precision ``beta``. The optional factor ``exp(-a'P a/2 + a'h)`` acts on the
    function values ``a`` at old pseudo-inputs and stands in for earlier data.
    Without it the bound is the standard variational sparse GP bound.

    ``Lb`` must be a Cholesky factor of ``Kbb`` (possibly jittered).
    """
    M = Lb.shape[0]
    N = y.shape[0]
    Vf = solve_lower(Lb, Kfb.T)
    Phi = beta * (Vf @ Vf.T)
    w = beta * (Vf @ y)
    has_old = Kab is not None and Kab.shape[0] > 0
    if has_old:
        Va = solve_lower(Lb, Kab.T)
        PVa = prec_a @ Va.T
        Phi = Phi + Va @ PVa
        w = w + Va @ shift_a
    Phi = 0.5 * (Phi + Phi.T)
    B = np.eye(M) + Phi
    LB = robust_cholesky(B)
    c = solve_lower(LB, w)

    trace_q = float(np.trace(Phi))
    value = (
        -0.5 * N * LOG_2PI
        + 0.5 * N * np.log(beta)
        - 0.5 * beta * float(y @ y)
        - 0.5 * beta * float(np.sum(kdiag))
        + 0.5 * trace_q
        + 0.5 * float(c @ c)
        - float(np.sum(np.log(np.diag(LB))))
        + const_a
    )
    if has_old:
        value -= 0.5 * float(np.sum(prec_a * Kaa))

    # gradients, expressed through whitened quantities
    Binv = chol_inverse(LB)
    ct = solve_upper_t(LB, c)
    inner_P = 0.5 * (np.eye(M) - Binv - np.outer(ct, ct))
    W_P = solve_upper_t(Lb, solve_upper_t(Lb, inner_P).T)
    W_P = 0.5 * (W_P + W_P.T)
    alpha = solve_upper_t(Lb, ct)
    KPK = solve_upper_t(Lb, solve_upper_t(Lb, Phi).T)
    KPK = 0.5 * (KPK + KPK.T)
    d_Kbb = W_P - 0.5 * KPK
    KfbW = Kfb @ W_P
    d_Kfb = 2.0 * beta * KfbW + beta * np.outer(y, alpha)
    d_beta = (
        -0.5 * float(y @ y)
        + 0.5 * N / beta
        - 0.5 * float(np.sum(kdiag))
        + float(np.sum(KfbW * Kfb))
        + float(alpha @ (Kfb.T @ y))
    )
    d_Kab = d_Kaa = None
    if has_old:
        d_Kab = 2.0 * prec_a @ (Kab @ W_P) + np.outer(shift_a, alpha)
        d_Kaa = -0.5 * prec_a

    # q(b): S = Lb inv(B) Lb', m = Lb inv(LB') c
    LbBinv = Lb @ Binv
    q_cov = LbBinv @ Lb.T
    q_cov = 0.5 * (q_cov + q_cov.T)
    q_mean = Lb @ ct
    site_precision, site_shift = _site(Kbb, Lb, Phi, w)
    site_log_scale = float(np.sum(np.log(np.diag(LB)))) - 0.5 * float(c @ c)
    return _Bound(value, d_Kbb, d_Kfb, -0.5 * beta, d_beta, d_Kab, d_Kaa,
                  q_mean, q_cov, site_precision, site_shift, site_log_scale)


# relative eigenvalue cutoff for the inverse of K_bb inside a stored site
SITE_RCOND = 1e-8


def _site(Kbb, Lb, Phi, w, rcond=None):
    """Site precision ``inv(K) G inv(K)`` and shift ``inv(K) g``.

    ``G = Lb Phi Lb'`` and ``g = Lb w`` are well scaled even when ``K_bb`` is
    nearly singular. The inverse is an eigenvalue-truncated pseudo-inverse so
    that directions ``K_bb`` cannot resolve do not carry huge precisions into
    the next update, where the hyperparameters may differ.
    """
    rcond = SITE_RCOND if rcond is None else rcond
    lam, U = np.linalg.eigh(Kbb)
    keep = lam > rcond * lam[-1]
    Uk = U[:, keep] / lam[keep]
    G = Lb @ Phi @ Lb.T
    precision = Uk @ (U[:, keep].T @ G @ U[:, keep]) @ Uk.T
    shift = Uk @ (U[:, keep].T @ (Lb @ w))
    return 0.5 * (precision + precision.T), shift


def _pseudo(Z, hp: Hyperparameters) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != hp.dim or Z.shape[0] < 1:
        raise ValueError(f"pseudo-inputs must be (M>=1, {hp.dim}), got {Z.shape}")
    return Z


def chain_bound(bound: _Bound, X, Z, hp: Hyperparameters, Kbb, Kfb, Za=None, Kab=None):
    """Map matrix-level gradients of a bound to ``[log hp, Z]`` gradients."""
    g_hp_b, g_Z1, g_Z2 = kernel_vjp(Z, Z, hp, bound.d_Kbb, Kbb)
    g_hp_f, _, g_Zf = kernel_vjp(X, Z, hp, bound.d_Kfb, Kfb)
    g_kernel = g_hp_b + g_hp_f
    # diag(K_ff) = sf2 depends only on the amplitude
    g_kernel[0] += bound.d_kdiag * hp.signal_variance * X.shape[0]
    g_Z = g_Z1 + g_Z2 + g_Zf
    if bound.d_Kab is not None:
        g_hp_a, _, g_Za = kernel_vjp(Za, Z, hp, bound.d_Kab, Kab)
        g_hp_aa, _, _ = kernel_vjp(Za, Za, hp, bound.d_Kaa)
        g_kernel = g_kernel + g_hp_a + g_hp_aa
        g_Z = g_Z + g_Za
    beta = 1.0 / hp.noise_variance
    g_noise = -bound.d_beta * beta
    return np.concatenate([g_kernel, [g_noise], g_Z.ravel()])


def _vsgp_bound(data: Dataset, Z, hp: Hyperparameters):
    Z = _pseudo(Z, hp)
    X = data.inputs if len(data) else np.zeros((0, hp.dim))
    Kbb = kernel_matrix(Z, Z, hp)
    Lb = robust_cholesky(Kbb)
    Kfb = kernel_matrix(X, Z, hp)
    kdiag = kernel_diag(X, hp)
    bound = collapsed_bound(Kbb, Lb, Kfb, kdiag, 1.0 / hp.noise_variance, data.targets)
    return bound, X, Z, Kbb, Kfb


def vsgp_elbo(data: Dataset, Z, hp: Hyperparameters) -> Objective:
    """Collapsed variational lower bound on the log marginal likelihood.

    Equals the log density of ``y`` under the Nystrom covariance ``Q + sn2 I``
    minus ``tr(K - Q) / (2 sn2)``.
    """
    if len(data) < 1:
        raise ValueError("need at least one observation")
    bound, X, Z, Kbb, Kfb = _vsgp_bound(data, Z, hp)
    return Objective(bound.value, chain_bound(bound, X, Z, hp, Kbb, Kfb))


def vsgp_optimal_q(data: Dataset, Z, hp: Hyperparameters) -> SparseState:
    """The Gaussian ``q(u)`` that maximizes the collapsed bound."""
    Z = _pseudo(Z, hp)
    if len(data) == 0:
        return SparseState.prior(Z, hp)
    bound, _, Z, Kbb, _ = _vsgp_bound(data, Z, hp)
    return SparseState(Z, bound.q_mean, bound.q_cov, hp, Kbb,
                       bound.site_precision, bound.site_shift, bound.site_log_scale)


def sparse_predict(state: SparseState, hp: Hyperparameters | None, queries) -> Prediction:
    """Predictive marginals of ``p(f | u) q(u)`` at ``queries``."""
    hp = hp or state.hp_snapshot
    queries = np.asarray(queries, dtype=float)
    Z = state.pseudo_inputs
    Kzz = kernel_matrix(Z, Z, hp)
    Lz = robust_cholesky(Kzz)
    A = solve_lower(Lz, kernel_matrix(Z, queries, hp))
    m_w = solve_lower(Lz, state.q_mean)
    S_w = solve_lower(Lz, solve_lower(Lz, state.q_cov).T)
    S_w = 0.5 * (S_w + S_w.T)
    mean = A.T @ m_w
    var = kernel_diag(queries, hp) - np.sum(A**2, axis=0) + np.sum(A * (S_w @ A), axis=0)
    return make_prediction(mean, var, hp)


def _fitc_terms(data: Dataset, Z, hp: Hyperparameters):
    Z = _pseudo(Z, hp)
    X, y = data.inputs, data.targets
    Kbb = kernel_matrix(Z, Z, hp)
    Lb = robust_cholesky(Kbb)
    Kfb = kernel_matrix(X, Z, hp)
    V = solve_lower(Lb, Kfb.T)
    nu = kernel_diag(X, hp) - np.sum(V**2, axis=0)
    nu = np.maximum(nu, 0.0) + hp.noise_variance
    Vn = V / nu
    A = np.eye(Z.shape[0]) + Vn @ V.T
    LA = robust_cholesky(0.5 * (A + A.T))
    return Z, X, y, Kbb, Lb, Kfb, V, nu, Vn, LA


def spgp_log_marginal_likelihood(data: Dataset, Z, hp: Hyperparameters) -> Objective:
    """FITC approximate log marginal likelihood.

    ``y ~ N(0, Q + diag(K - Q) + sn2 I)`` with ``Q = K_fz inv(K_zz) K_zf``.
    """
    if len(data) < 1:
        raise ValueError("need at least one observation")
    Z, X, y, Kbb, Lb, Kfb, V, nu, Vn, LA = _fitc_terms(data, Z, hp)
    N = y.shape[0]
    # Woodbury: inv(Sigma) = inv(N) - inv(N) V' inv(A) V inv(N)
    r = solve_lower(LA, Vn @ y)
    gamma = y / nu - (Vn.T @ solve_upper_t(LA, r))
    logdet = float(np.sum(np.log(nu))) + 2.0 * float(np.sum(np.log(np.diag(LA))))
    value = -0.5 * float(y @ gamma) - 0.5 * logdet - 0.5 * N * LOG_2PI

    E = solve_lower(LA, Vn)
    diag_inv = 1.0 / nu - np.sum(E**2, axis=0)
    diag_R = 0.5 * (gamma**2 - diag_inv)
    SinvK = Kfb / nu[:, None] - Vn.T @ solve_upper_t(LA, solve_lower(LA, Vn @ Kfb))
    RK = 0.5 * (np.outer(gamma, gamma @ Kfb) - SinvK)
    RtK = RK - diag_R[:, None] * Kfb
    Kinv = chol_inverse(Lb)
    d_Kfb = 2.0 * RtK @ Kinv
    inner = Kfb.T @ RtK
    d_Kbb = -Kinv @ (0.5 * (inner + inner.T)) @ Kinv

    g_hp_b, g_Z1, g_Z2 = kernel_vjp(Z, Z, hp, d_Kbb, Kbb)
    g_hp_f, _, g_Zf = kernel_vjp(X, Z, hp, d_Kfb, Kfb)
    g_kernel = g_hp_b + g_hp_f
    g_kernel[0] += float(np.sum(diag_R)) * hp.signal_variance
    g_noise = float(np.sum(diag_R)) * hp.noise_variance
    grad = np.concatenate([g_kernel, [g_noise], (g_Z1 + g_Z2 + g_Zf).ravel()])
    return Objective(value, grad)


def spgp_posterior(data: Dataset, Z, hp: Hyperparameters) -> SparseState:
    """FITC posterior over the pseudo-outputs, as a :class:`SparseState`."""
    if len(data) == 0:
        return SparseState.prior(_pseudo(Z, hp), hp)
    Z, X, y, Kbb, Lb, Kfb, V, nu, Vn, LA = _fitc_terms(data, Z, hp)
    Ainv = chol_inverse(LA)
    q_cov = Lb @ Ainv @ Lb.T
    q_mean = Lb @ (Ainv @ (Vn @ y))
    return SparseState(Z, q_mean, 0.5 * (q_cov + q_cov.T), hp, Kbb)


def fit_vsgp(data: Dataset, Z0, hp0: Hyperparameters, config=None,
             fit_hp: bool = True, fit_pseudo: bool = True) -> FitResult:
    """Maximize the collapsed bound over hyperparameters and pseudo-inputs."""
    return fit_parameters(lambda hp, Z: vsgp_elbo(data, Z, hp), hp0, Z0, config,
                          fit_hp, fit_pseudo)


def fit_spgp(data: Dataset, Z0, hp0: Hyperparameters, config=None,
             fit_hp: bool = True, fit_pseudo: bool = True) -> FitResult:
    """Maximize the FITC marginal likelihood over hyperparameters and pseudo-inputs."""
    return fit_parameters(lambda hp, Z: spgp_log_marginal_likelihood(data, Z, hp), hp0, Z0,
                          config, fit_hp, fit_pseudo)
