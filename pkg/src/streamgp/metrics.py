"""Accuracy metrics, memory accounting and timing for one batch of a run."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .models.base import Prediction


@dataclass(frozen=True)
class BatchRecord:
    model: str
    batch_index: int
    cumulative_n: int
    m_pseudo: int
    rmse: float
    nlpd: float
    train_seconds: float
    predict_seconds: float
    onboard_points: int
    sigma_f2: float
    ell_1: float
    ell_2: float
    sigma_y2: float
    failed: bool = False


def rmse(truth, predicted_mean) -> float:
    """Root mean squared error between the true field and the posterior mean."""
    truth = np.asarray(truth, dtype=float).ravel()
    predicted_mean = np.asarray(predicted_mean, dtype=float).ravel()
    if truth.shape != predicted_mean.shape:
        raise ValueError(f"length mismatch: {truth.size} vs {predicted_mean.size}")
    if truth.size == 0:
        raise ValueError("need at least one test point")
    return float(np.sqrt(np.mean((truth - predicted_mean) ** 2)))


def nlpd(test_targets, prediction: Prediction) -> float:
    """Average negative log density of the targets under the predictive Gaussians."""
    y = np.asarray(test_targets, dtype=float).ravel()
    mean = np.asarray(prediction.mean, dtype=float).ravel()
    var = np.asarray(prediction.variance_y, dtype=float).ravel()
    if y.shape != mean.shape or y.shape != var.shape:
        raise ValueError("targets and prediction differ in length")
    if np.any(var <= 0):
        raise ValueError("predictive variance must be positive")
    return float(np.mean(0.5 * np.log(2.0 * np.pi * var) + 0.5 * (y - mean) ** 2 / var))


def onboard_count(model_kind: str, n_seen: int, m_pseudo: int = 0, batch_size: int = 0,
                  window: int = 500) -> int:
    """Training plus pseudo points a model must keep in memory."""
    kind = model_kind.upper()
    if kind == "GPR":
        return n_seen
    if kind.startswith("GPR"):
        return min(n_seen, window)
    if kind in ("VSGP", "SPGP"):
        return n_seen + m_pseudo
    if kind == "SSGP":
        return batch_size + m_pseudo
    raise ValueError(f"unknown model kind {model_kind!r}")


@contextmanager
def stopwatch():
    """Yield a one-element list that receives the elapsed monotonic seconds."""
    elapsed = [0.0]
    start = time.perf_counter()
    try:
        yield elapsed
    finally:
        elapsed[0] = time.perf_counter() - start
