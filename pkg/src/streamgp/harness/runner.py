"""Replay a lawnmower stream through every configured model."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict

import numpy as np
from scipy.linalg import LinAlgError

from .. import __version__
from ..environment import (FieldGrid, lawnmower_plan, load_grid_csv, observe_batches,
                           sample_gp_field)
from ..kernels import Dataset, Hyperparameters
from ..linalg import NumericalError
from ..metrics import BatchRecord, nlpd, onboard_count, rmse, stopwatch
from ..models import (GPRState, OptimizationWarning, SSGPConfig, SparseState, fit_gpr,
                      fit_spgp, fit_vsgp, gpr_predict, gpr_window_update, grow_pseudo_inputs,
                      sparse_predict, spgp_posterior, ssgp_init, ssgp_update, vsgp_optimal_q)
from ..models.base import Prediction
from ..optimize import OptimizerConfig
from .config import ExperimentConfig
from .results import ResultTable

logger = logging.getLogger(__name__)

PREDICT_CHUNK = 2000
MODEL_ERRORS = (NumericalError, LinAlgError, ValueError, FloatingPointError)


def pseudo_point_count(alpha: float, n: int, log_base: float | None = None) -> int:
    """``ceil(alpha * log(n)^2 + 1)``; natural log unless ``log_base`` is given."""
    if n < 1:
        raise ValueError("n must be positive")
    log_n = math.log(n) if log_base is None else math.log(n, log_base)
    return math.ceil(alpha * log_n**2 + 1)


def _predict_chunked(predict, queries) -> Prediction:
    parts = [predict(queries[i:i + PREDICT_CHUNK]) for i in range(0, len(queries), PREDICT_CHUNK)]
    return Prediction(*(np.concatenate([getattr(p, k) for p in parts])
                        for k in ("mean", "variance_f", "variance_y")))


class _Runner:
    """Common bookkeeping for one model over the stream."""

    kind = ""

    def __init__(self, label, hp0: Hyperparameters, optimizer: OptimizerConfig):
        self.label = label
        self.hp = hp0
        self.optimizer = optimizer
        self.n_seen = 0
        self.ready = False

    def update(self, batch: Dataset):
        raise NotImplementedError

    def predict(self, queries) -> Prediction:
        raise NotImplementedError

    @property
    def m_pseudo(self) -> int:
        return 0

    def onboard(self, batch_size: int) -> int:
        return onboard_count(self.kind, self.n_seen, self.m_pseudo, batch_size)


class GPRRunner(_Runner):
    kind = "GPR"

    def __init__(self, label, hp0, optimizer, window=None):
        super().__init__(label, hp0, optimizer)
        self.window = window
        self.state = GPRState(Dataset.empty(hp0.dim), hp0)

    def update(self, batch):
        state = gpr_window_update(self.state, batch, self.window)
        fit = fit_gpr(state.data, state.hp, self.optimizer)
        self.state = GPRState(state.data, fit.hp, state.seen)
        self.hp = fit.hp
        self.n_seen = state.seen
        self.ready = True

    def predict(self, queries):
        return gpr_predict(self.state.data, self.state.hp, queries)

    def onboard(self, batch_size):
        return len(self.state.data)


class SparseRunner(_Runner):
    """VSGP or SPGP refit on all data seen so far, warm-started each batch."""

    def __init__(self, label, hp0, optimizer, Z0):
        super().__init__(label, hp0, optimizer)
        self.kind = label
        self.Z = np.asarray(Z0, dtype=float)
        self.data = Dataset.empty(hp0.dim)
        self.state: SparseState | None = None

    def update(self, batch):
        data = self.data.concat(batch)
        if self.kind == "VSGP":
            fit = fit_vsgp(data, self.Z, self.hp, self.optimizer)
            state = vsgp_optimal_q(data, fit.pseudo_inputs, fit.hp)
        else:
            fit = fit_spgp(data, self.Z, self.hp, self.optimizer)
            state = spgp_posterior(data, fit.pseudo_inputs, fit.hp)
        self.data, self.Z, self.hp, self.state = data, fit.pseudo_inputs, fit.hp, state
        self.n_seen = len(data)
        self.ready = True

    def predict(self, queries):
        return sparse_predict(self.state, self.hp, queries)

    @property
    def m_pseudo(self):
        return self.Z.shape[0]


class SSGPRunner(_Runner):
    kind = "SSGP"

    def __init__(self, label, hp0, optimizer, Z0, schedule=None, seed=0):
        super().__init__(label, hp0, optimizer)
        self.Z0 = np.asarray(Z0, dtype=float)
        self.schedule = schedule
        self.seed = seed
        self.state: SparseState | None = None

    def update(self, batch):
        config = SSGPConfig(self.optimizer, seed=self.seed)
        if self.state is None:
            state = ssgp_init(batch, self.Z0, self.hp, config)
        else:
            m = None
            if self.schedule:
                # new pseudo-inputs only come from the new batch
                m = min(self.schedule(self.n_seen + len(batch)),
                        self.state.num_pseudo + len(batch))
                m = max(m, self.state.num_pseudo)
            config = SSGPConfig(self.optimizer, num_pseudo=m, seed=self.seed + self.n_seen)
            state, _ = ssgp_update(self.state, batch, config)
        self.state = state
        self.hp = state.hp_snapshot
        self.n_seen += len(batch)
        self.ready = True

    def predict(self, queries):
        return sparse_predict(self.state, self.hp, queries)

    @property
    def m_pseudo(self):
        return self.state.num_pseudo if self.state is not None else self.Z0.shape[0]


def build_field(config: ExperimentConfig) -> FieldGrid:
    if config.field_source == "csv":
        return load_grid_csv(config.csv_path)
    return sample_gp_field(config.width, config.height, config.field_hyperparameters(),
                           config.field_seed)


def build_stream(config: ExperimentConfig, field: FieldGrid) -> list[Dataset]:
    plan = lawnmower_plan(field, config.transect_count, config.batch_size,
                          config.samples_per_transect, config.noise_variance)
    batches = observe_batches(field, plan, np.random.default_rng(config.seed))
    if config.max_batches is not None:
        batches = batches[: config.max_batches]
    return batches


def _make_runners(config: ExperimentConfig, first_batch: Dataset, ssgp_schedule=None,
                  models=None):
    hp0 = config.init_hyperparameters()
    opt = config.optimizer_config()
    m_ssgp = config.num_pseudo
    if ssgp_schedule is not None:
        m_ssgp = ssgp_schedule(len(first_batch))
    m_ssgp = min(m_ssgp, len(first_batch))
    m_fixed = min(config.num_pseudo, len(first_batch))
    runners = []
    for name in models or config.models:
        if name == "GPR":
            runners.append(GPRRunner(name, hp0, opt))
        elif name.startswith("GPR"):
            runners.append(GPRRunner(name, hp0, opt, window=int(name[3:])))
        elif name in ("VSGP", "SPGP"):
            Z0 = grow_pseudo_inputs(None, first_batch.inputs, m_fixed, hp0, config.seed)
            runners.append(SparseRunner(name, hp0, opt, Z0))
        else:
            Z0 = grow_pseudo_inputs(None, first_batch.inputs, m_ssgp, hp0, config.seed)
            runners.append(SSGPRunner(name, hp0, opt, Z0, ssgp_schedule, config.seed))
    return runners


def _record(runner: _Runner, index, batch_size, prediction, truth, test_targets,
            train_s, predict_s, failed) -> BatchRecord:
    if prediction is not None:
        err, dens = rmse(truth, prediction.mean), nlpd(test_targets, prediction)
    else:
        err = dens = float("nan")
    sf2, (l1, l2), sn2 = (runner.hp.signal_variance, runner.hp.lengthscales,
                          runner.hp.noise_variance)
    return BatchRecord(
        model=runner.label, batch_index=index, cumulative_n=runner.n_seen,
        m_pseudo=runner.m_pseudo, rmse=err, nlpd=dens, train_seconds=train_s,
        predict_seconds=predict_s, onboard_points=runner.onboard(batch_size),
        sigma_f2=sf2, ell_1=float(l1), ell_2=float(l2), sigma_y2=sn2, failed=failed,
    )


def _replay(config, runners, batches, field) -> list[BatchRecord]:
    queries = field.coordinates()
    truth = field.values
    test_rng = np.random.default_rng(config.test_noise_seed)
    test_targets = truth + math.sqrt(config.noise_variance) * test_rng.standard_normal(truth.size)
    rows = []
    for index, batch in enumerate(batches):
        for runner in runners:
            failed = False
            with stopwatch() as train_t:
                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", OptimizationWarning)
                        runner.update(batch)
                except MODEL_ERRORS as exc:
                    logger.warning("%s failed at batch %d: %s", runner.label, index, exc)
                    failed = True
            prediction = None
            with stopwatch() as predict_t:
                if runner.ready:
                    try:
                        prediction = _predict_chunked(runner.predict, queries)
                    except MODEL_ERRORS as exc:
                        logger.warning("%s prediction failed at batch %d: %s",
                                       runner.label, index, exc)
                        failed = True
            rows.append(_record(runner, index, len(batch), prediction, truth, test_targets,
                                train_t[0], predict_t[0], failed))
            logger.info("batch %d %s rmse=%.4f", index, runner.label, rows[-1].rmse)
    return rows


def _metadata(config: ExperimentConfig, **extra) -> dict:
    meta = {
        "config": asdict(config),
        "code_version": __version__,
        "seeds": {"field": config.field_seed, "observations": config.seed,
                  "test_noise": config.test_noise_seed},
    }
    meta.update(extra)
    return meta


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Replay the configured stream through every model, one row per (model, batch)."""
    field = build_field(config)
    batches = build_stream(config, field)
    schedule = None
    if config.alpha is not None:
        schedule = lambda n: pseudo_point_count(config.alpha, n, config.log_base)  # noqa: E731
    runners = _make_runners(config, batches[0], schedule)
    rows = _replay(config, runners, batches, field)
    return ResultTable(rows, _metadata(config, batch_count=len(batches)))


def run_scaling_study(config: ExperimentConfig, alphas=(0.5, 1.0, 2.0, 4.0)) -> dict[str, ResultTable]:
    """SSGP with ``M = ceil(alpha log^2 N + 1)`` per alpha, plus a GPR reference.

    Each alpha is an independent run on the same stream. Keys are ``"GPR"``
    and ``"alpha=<value>"``.
    """
    if "SSGP" not in config.models:
        raise ValueError("the scaling study needs SSGP in the model list")
    field = build_field(config)
    batches = build_stream(config, field)
    tables = {}
    runners = _make_runners(config, batches[0], models=["GPR"])
    tables["GPR"] = ResultTable(_replay(config, runners, batches, field),
                                _metadata(config, batch_count=len(batches), reference=True))
    for alpha in alphas:
        schedule = lambda n, a=alpha: pseudo_point_count(a, n, config.log_base)  # noqa: E731
        runners = _make_runners(config, batches[0], schedule, models=["SSGP"])
        rows = _replay(config, runners, batches, field)
        tables[f"alpha={alpha:g}"] = ResultTable(
            rows, _metadata(config, batch_count=len(batches), alpha=alpha))
    return tables
