import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamgp.kernels import (Dataset, Hyperparameters, kernel_eval, kernel_gradients,
                              kernel_matrix, kernel_vjp)
from streamgp.linalg import robust_cholesky
from streamgp.optimize import check_gradient

from conftest import random_hp

coord = st.floats(-3, 3, allow_nan=False)
point = st.tuples(coord, coord)
log_ell = st.floats(-2, 1)


def test_hyperparameters_round_trip():
    hp = Hyperparameters.from_values(1.5, [0.3, 0.7], 0.01)
    assert np.allclose(hp.lengthscales, [0.3, 0.7])
    assert hp.signal_variance == pytest.approx(1.5)
    assert Hyperparameters.from_vector(hp.to_vector()) == hp


@pytest.mark.parametrize("bad", [np.inf, np.nan])
def test_hyperparameters_reject_non_finite(bad):
    with pytest.raises(ValueError):
        Hyperparameters(0.0, (bad, 0.0), 0.0)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.0, np.nan]]), np.zeros(1))
    d = Dataset(np.arange(10.0).reshape(5, 2), np.arange(5.0))
    assert len(d.tail(3)) == 3 and d.tail(3).targets[0] == 2.0


def test_kernel_eval_examples():
    unit = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    assert kernel_eval([0.2, 0.4], [0.2, 0.4], unit) == 1.0
    assert kernel_eval([1.0, 0.0], [0.0, 0.0], unit) == pytest.approx(math.exp(-0.5), abs=1e-12)
    field = Hyperparameters.from_values(1.0, [0.3, 0.7], 0.01)
    assert kernel_eval([0.3, 0.7], [0.0, 0.0], field) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_kernel_eval_dimension_mismatch():
    hp = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    with pytest.raises(ValueError):
        kernel_eval([0.0, 0.0, 0.0], [0.0, 0.0], hp)
    with pytest.raises(ValueError):
        kernel_matrix(np.zeros((3, 3)), np.zeros((2, 2)), hp)


@given(point, point, log_ell, log_ell, st.floats(-2, 2))
def test_kernel_symmetric_and_bounded(a, b, l1, l2, lsf):
    hp = Hyperparameters(lsf, (l1, l2), -2.0)
    k = kernel_eval(a, b, hp)
    assert k == kernel_eval(b, a, hp)
    assert 0.0 <= k <= hp.signal_variance * (1 + 1e-12)
    if a == b:
        assert k == pytest.approx(hp.signal_variance)


@given(point, point, log_ell, st.floats(0.01, 2.0))
def test_kernel_monotone_in_lengthscale(a, b, l1, bump):
    hp = Hyperparameters(0.0, (l1, 0.0), -2.0)
    longer = Hyperparameters(0.0, (l1 + bump, 0.0), -2.0)
    assert kernel_eval(a, b, longer) >= kernel_eval(a, b, hp)


def test_kernel_matrix_small_cases():
    hp = Hyperparameters.from_values(2.5, [0.3, 0.7], 0.01)
    assert np.allclose(kernel_matrix([[0.1, 0.2]], [[0.1, 0.2]], hp), [[2.5]])
    K = kernel_matrix([[0.4, 0.4], [0.4, 0.4]], [[0.4, 0.4], [0.4, 0.4]], hp)
    assert np.allclose(K, 2.5 * np.ones((2, 2)))
    assert np.linalg.matrix_rank(K) == 1


def test_kernel_matrix_matches_double_loop(rng):
    hp = random_hp(rng)
    X1 = rng.uniform(size=(5, 2))
    X2 = rng.uniform(size=(4, 2))
    loop = np.array([[kernel_eval(a, b, hp) for b in X2] for a in X1])
    assert np.allclose(kernel_matrix(X1, X2, hp), loop, atol=1e-14, rtol=1e-12)
    K = kernel_matrix(X1, X1, hp)
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-12


def test_noisy_kernel_needs_no_jitter_when_well_separated():
    hp = Hyperparameters.from_values(1.0, [0.3, 0.7], 0.01)
    g = np.linspace(0, 1, 6)
    X = np.array([[a, b] for a in g for b in g])
    K = kernel_matrix(X, X, hp) + hp.noise_variance * np.eye(len(X))
    _, jitter = robust_cholesky(K, return_jitter=True)
    assert jitter <= 1e-8 * np.mean(np.diag(K))


def test_gradient_special_cases(rng):
    hp = random_hp(rng)
    X = rng.uniform(size=(4, 2))
    grads = kernel_gradients(X, X, hp)
    assert np.allclose(grads[0], kernel_matrix(X, X, hp))
    for g in grads[1:]:
        assert np.allclose(np.diag(g), 0.0)


def test_gradients_match_finite_differences(rng):
    for _ in range(20):
        hp = random_hp(rng)
        a = rng.uniform(size=(1, 2))
        b = rng.uniform(size=(1, 2))
        analytic = np.array([g[0, 0] for g in kernel_gradients(a, b, hp)])
        theta = hp.to_vector()
        step = 1e-5
        for i in range(hp.dim + 1):
            e = np.zeros_like(theta)
            e[i] = step
            kp = kernel_matrix(a, b, Hyperparameters.from_vector(theta + e))[0, 0]
            km = kernel_matrix(a, b, Hyperparameters.from_vector(theta - e))[0, 0]
            fd = (kp - km) / (2 * step)
            assert abs(analytic[i] - fd) <= 1e-4 * max(abs(fd), 1e-8)


def test_vjp_matches_explicit_contraction(rng):
    hp = random_hp(rng)
    X1 = rng.uniform(size=(6, 2))
    X2 = rng.uniform(size=(3, 2))
    W = rng.standard_normal((6, 3))
    g_hp, g1, g2 = kernel_vjp(X1, X2, hp, W)
    explicit = [np.sum(W * g) for g in kernel_gradients(X1, X2, hp)]
    assert np.allclose(g_hp, explicit)

    def wrt_x1(v):
        K = kernel_matrix(v.reshape(X1.shape), X2, hp)
        return np.sum(W * K), kernel_vjp(v.reshape(X1.shape), X2, hp, W)[1].ravel()

    def wrt_x2(v):
        K = kernel_matrix(X1, v.reshape(X2.shape), hp)
        return np.sum(W * K), kernel_vjp(X1, v.reshape(X2.shape), hp, W)[2].ravel()

    assert check_gradient(wrt_x1, X1.ravel()) < 1e-6
    assert check_gradient(wrt_x2, X2.ravel()) < 1e-6


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_kernel_matrix_psd_property(seed):
    r = np.random.default_rng(seed)
    hp = random_hp(r)
    X = r.uniform(size=(8, 2))
    assert np.linalg.eigvalsh(kernel_matrix(X, X, hp)).min() > -1e-10
