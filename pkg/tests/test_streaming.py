import numpy as np
import pytest

from streamgp.kernels import Dataset, Hyperparameters
from streamgp.models import (SSGPConfig, SparseState, fit_vsgp, grow_pseudo_inputs,
                             sparse_predict, ssgp_elbo, ssgp_init, ssgp_optimal_q, ssgp_update,
                             vsgp_elbo, vsgp_optimal_q)
from streamgp.optimize import OptimizerConfig, check_gradient

from conftest import as_flat, random_data, random_hp

pytestmark = pytest.mark.filterwarnings("ignore::streamgp.models.OptimizationWarning")

FROZEN = SSGPConfig(fit_hyperparameters=False, fit_pseudo_inputs=False)


def _split(data, k):
    idx = np.array_split(np.arange(len(data)), k)
    return [Dataset(data.inputs[i], data.targets[i]) for i in idx]


def test_prior_state_reduces_to_vsgp(rng):
    data = random_data(rng, 20)
    hp = random_hp(rng)
    Z = rng.uniform(size=(5, 2))
    prior = SparseState.prior(Z, hp)
    stream = ssgp_elbo(prior, data, Z, hp)
    batch = vsgp_elbo(data, Z, hp)
    assert stream.value == pytest.approx(batch.value, abs=1e-6)
    assert np.allclose(stream.gradient, batch.gradient, atol=1e-6)


def test_empty_batch_gives_zero_bound_and_same_q(rng):
    data = random_data(rng, 15)
    hp = random_hp(rng)
    Z = rng.uniform(size=(4, 2))
    old = vsgp_optimal_q(data, Z, hp)
    empty = Dataset.empty(2)
    assert ssgp_elbo(old, empty, Z, hp).value == pytest.approx(0.0, abs=1e-8)
    new = ssgp_optimal_q(old, empty, Z, hp)
    assert np.allclose(new.q_mean, old.q_mean, atol=1e-8)
    assert np.allclose(new.q_cov, old.q_cov, atol=1e-8)


def test_two_batch_bounds_add_up_to_one_shot(rng):
    data = random_data(rng, 30)
    hp = random_hp(rng)
    Z = rng.uniform(size=(6, 2))
    first, second = _split(data, 2)
    total = vsgp_elbo(first, Z, hp).value
    state = vsgp_optimal_q(first, Z, hp)
    total += ssgp_elbo(state, second, Z, hp).value
    assert total == pytest.approx(vsgp_elbo(data, Z, hp).value, abs=1e-5)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_frozen_streaming_matches_concatenated_vsgp(rng, k):
    data = random_data(rng, 100)
    hp = random_hp(rng)
    Z = rng.uniform(size=(8, 2))
    state = SparseState.prior(Z, hp)
    for batch in _split(data, k):
        state, _ = ssgp_update(state, batch, FROZEN)
    ref = vsgp_optimal_q(data, Z, hp)
    Q = rng.uniform(size=(50, 2))
    a = sparse_predict(state, hp, Q)
    b = sparse_predict(ref, hp, Q)
    assert np.max(np.abs(a.mean - b.mean)) < 1e-5
    assert np.max(np.abs(a.variance_f - b.variance_f)) < 1e-5


def test_moment_route_matches_stored_site(rng):
    data = random_data(rng, 20)
    hp = random_hp(rng)
    Z = rng.uniform(size=(5, 2))
    old = vsgp_optimal_q(data, Z, hp)
    bare = SparseState(old.pseudo_inputs, old.q_mean, old.q_cov, hp, old.prior_cached)
    batch = random_data(rng, 10)
    Zn = rng.uniform(size=(6, 2))
    hpn = random_hp(rng)
    assert ssgp_elbo(bare, batch, Zn, hpn).value == pytest.approx(
        ssgp_elbo(old, batch, Zn, hpn).value, abs=1e-6)


def test_wide_q_is_clamped(rng):
    hp = random_hp(rng)
    Z = rng.uniform(size=(3, 2))
    K = SparseState.prior(Z, hp).prior_cached
    # q wider than the prior: inv(S) - inv(K) is negative definite
    wide = SparseState(Z, np.zeros(3), 4.0 * K, hp, K).with_site()
    assert np.linalg.eigvalsh(wide.site_precision).min() >= 1e-8 - 1e-15
    value = ssgp_elbo(wide, random_data(rng, 5), Z, hp).value
    assert np.isfinite(value)


def test_streaming_gradient(rng):
    for _ in range(10):
        old = vsgp_optimal_q(random_data(rng, 12), rng.uniform(size=(4, 2)), random_hp(rng))
        batch = random_data(rng, 10)
        Zn = rng.uniform(size=(5, 2))
        hpn = random_hp(rng)
        fun, x0 = as_flat(lambda h, z: ssgp_elbo(old, batch, z, h), hpn, Zn)
        assert check_gradient(fun, x0) < 1e-3


def test_first_batch_matches_vsgp(rng):
    batch = random_data(rng, 30)
    hp0 = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    Z0 = batch.inputs[:6]
    config = SSGPConfig(OptimizerConfig(max_iterations=30))
    state = ssgp_init(batch, Z0, hp0, config)
    fit = fit_vsgp(batch, Z0, hp0, config.optimizer)
    ref = vsgp_optimal_q(batch, fit.pseudo_inputs, fit.hp)
    Q = rng.uniform(size=(20, 2))
    assert np.allclose(sparse_predict(state, None, Q).mean, sparse_predict(ref, None, Q).mean)
    again = ssgp_init(batch, Z0, hp0, config)
    assert np.array_equal(again.q_mean, state.q_mean)


def test_init_rejects_empty_batch():
    hp = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    with pytest.raises(ValueError):
        ssgp_init(Dataset.empty(2), np.zeros((2, 2)), hp)


def test_representing_summarized_data_changes_little(rng):
    # dense, low-noise data already pin q(u) down; showing them again is a no-op
    data = random_data(rng, 400)
    hp = Hyperparameters.from_values(1.0, [0.3, 0.4], 0.01)
    Z = rng.uniform(size=(10, 2))
    state = vsgp_optimal_q(data, Z, hp)
    grid = np.stack(np.meshgrid(np.linspace(0, 1, 15), np.linspace(0, 1, 15)), -1).reshape(-1, 2)
    before = sparse_predict(state, hp, grid).mean
    again, _ = ssgp_update(state, data, FROZEN)
    after = sparse_predict(again, hp, grid).mean
    assert np.sqrt(np.mean((after - before) ** 2)) < 1e-3


def test_update_is_deterministic(rng):
    old = vsgp_optimal_q(random_data(rng, 20), rng.uniform(size=(5, 2)), random_hp(rng))
    batch = random_data(rng, 15)
    config = SSGPConfig(OptimizerConfig(max_iterations=15), num_pseudo=7)
    a, oa = ssgp_update(old, batch, config)
    b, ob = ssgp_update(old, batch, config)
    assert np.array_equal(a.q_mean, b.q_mean) and oa.value == ob.value
    assert np.array_equal(a.pseudo_inputs, b.pseudo_inputs)


def test_growth_adds_pseudo_points(rng):
    old = vsgp_optimal_q(random_data(rng, 20), rng.uniform(size=(5, 2)), random_hp(rng))
    batch = random_data(rng, 15)
    state, objective = ssgp_update(old, batch, SSGPConfig(OptimizerConfig(max_iterations=10),
                                                          num_pseudo=9))
    assert state.num_pseudo == 9
    assert objective.gradient.shape == (4 + 18,)
    np.linalg.cholesky(state.q_cov + 1e-12 * np.eye(9))
    assert np.allclose(state.q_cov, state.q_cov.T)


def test_update_improves_streaming_bound(rng):
    old = vsgp_optimal_q(random_data(rng, 20), rng.uniform(size=(5, 2)), random_hp(rng))
    batch = random_data(rng, 25)
    start = ssgp_elbo(old, batch, old.pseudo_inputs, old.hp_snapshot).value
    _, objective = ssgp_update(old, batch, SSGPConfig(OptimizerConfig(max_iterations=20)))
    assert objective.value >= start


def test_evidence_never_increases_variance_at_pseudo_inputs(rng):
    hp = random_hp(rng)
    Z = rng.uniform(size=(6, 2))
    state = SparseState.prior(Z, hp)
    previous = sparse_predict(state, hp, Z).variance_f
    for _ in range(5):
        state, _ = ssgp_update(state, random_data(rng, 10), FROZEN)
        current = sparse_predict(state, hp, Z).variance_f
        assert np.all(current <= previous + 1e-10)
        previous = current


def test_grow_pseudo_inputs_picks_farthest():
    hp = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    Z = np.array([[0.0, 0.0]])
    cand = np.array([[0.1, 0.0], [1.0, 1.0], [0.5, 0.5], [0.9, 1.0]])
    grown = grow_pseudo_inputs(Z, cand, 2, hp)
    assert np.array_equal(grown[1], [1.0, 1.0])
    assert np.array_equal(grown[2], [0.5, 0.5])


def test_grow_pseudo_inputs_uses_lengthscale_distance():
    hp = Hyperparameters.from_values(1.0, [10.0, 0.1], 0.1)
    cand = np.array([[1.0, 0.0], [0.0, 0.3]])
    grown = grow_pseudo_inputs(np.zeros((1, 2)), cand, 1, hp)
    assert np.array_equal(grown[1], [0.0, 0.3])


def test_grow_pseudo_inputs_fills_when_candidates_run_out():
    hp = Hyperparameters.from_values(1.0, [1.0, 1.0], 0.1)
    grown = grow_pseudo_inputs(None, np.array([[0.2, 0.2]]), 3, hp, seed=1)
    assert grown.shape == (3, 2)
    assert np.all((grown >= 0) & (grown <= 1))
    assert np.array_equal(grown, grow_pseudo_inputs(None, np.array([[0.2, 0.2]]), 3, hp, seed=1))


def test_site_survives_nearly_singular_pseudo_inputs(rng):
    # pseudo-inputs packed on a short line: K_aa is numerically rank deficient
    line = np.column_stack([np.zeros(12), np.linspace(0.3, 0.6, 12)])
    hp = Hyperparameters.from_values(1.0, [1.0, 0.8], 0.01)
    y = np.sin(4 * line[:, 1])
    old = vsgp_optimal_q(Dataset(line, y), line, hp)
    assert np.linalg.cond(old.prior_cached) > 1e12
    assert np.abs(old.site_precision).max() < 1e12
    batch = Dataset(np.column_stack([np.full(5, 0.1), np.linspace(0.3, 0.6, 5)]), np.zeros(5))
    moved = Hyperparameters.from_values(1.0, [0.5, 0.6], 0.01)
    Z = np.vstack([line, batch.inputs])
    obj = ssgp_elbo(old, batch, Z, moved)
    assert np.isfinite(obj.value) and abs(obj.value) < 1e3
    assert np.all(np.isfinite(obj.gradient))
