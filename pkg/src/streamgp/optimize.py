"""Limited-memory BFGS with a strong-Wolfe line search, plus a gradient checker.

Every hyperparameter in this package lives in log space, so the problems
handed to :func:`minimize` are unconstrained.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-5
    memory_pairs: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_evals: int = 30
    # read by the hyperparameter fitter, not by minimize itself
    max_lengthscale: float | None = None

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.memory_pairs < 1:
            raise ValueError("memory_pairs must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.max_lengthscale is not None and not self.max_lengthscale > 0:
            raise ValueError("max_lengthscale must be positive")


class Termination(str, enum.Enum):
    GRADIENT_SMALL = "gradient_small"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILED = "line_search_failed"


@dataclass(frozen=True)
class OptimizationResult:
    best_point: np.ndarray
    best_value: float
    best_gradient: np.ndarray
    iterations_used: int
    evaluations: int
    converged: bool
    termination_reason: Termination


def _finite(value, grad) -> bool:
    return bool(np.isfinite(value) and np.all(np.isfinite(grad)))


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating two points with slopes, or None."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


class _LineSearch:
    """Strong-Wolfe bracketing/zoom search along a fixed direction."""

    def __init__(self, fun, x, f0, g0, direction, c1, c2, max_evals):
        self.fun = fun
        self.x = x
        self.d = direction
        self.f0 = f0
        self.dg0 = float(g0 @ direction)
        self.c1 = c1
        self.c2 = c2
        self.max_evals = max_evals
        self.evals = 0

    def _phi(self, alpha):
        self.evals += 1
        f, g = self.fun(self.x + alpha * self.d)
        f = float(f)
        g = np.asarray(g, dtype=float)
        if not _finite(f, g):
            return np.inf, np.nan, None
        return f, float(g @ self.d), g

    def _armijo_ok(self, alpha, f):
        return f <= self.f0 + self.c1 * alpha * self.dg0

    def _curvature_ok(self, dg):
        return abs(dg) <= self.c2 * abs(self.dg0)

    def search(self, alpha):
        a_prev, f_prev, dg_prev = 0.0, self.f0, self.dg0
        first = True
        while self.evals < self.max_evals:
            f, dg, g = self._phi(alpha)
            if not np.isfinite(f):
                # shrink toward the last good point; never accept non-finite
                alpha = a_prev + 0.1 * (alpha - a_prev)
                continue
            if not self._armijo_ok(alpha, f) or (not first and f >= f_prev):
                return self._zoom(a_prev, f_prev, dg_prev, alpha, f, dg)
            if self._curvature_ok(dg):
                return alpha, f, g
            if dg >= 0:
                return self._zoom(alpha, f, dg, a_prev, f_prev, dg_prev)
            a_prev, f_prev, dg_prev = alpha, f, dg
            alpha *= 2.0
            first = False
        return None

    def _zoom(self, lo, f_lo, dg_lo, hi, f_hi, dg_hi):
        while self.evals < self.max_evals:
            width = hi - lo
            trial = None
            if np.isfinite(f_hi) and np.isfinite(dg_hi):
                trial = _cubic_min(lo, f_lo, dg_lo, hi, f_hi, dg_hi)
            lo_edge = min(lo, hi) + 0.1 * abs(width)
            hi_edge = max(lo, hi) - 0.1 * abs(width)
            if trial is None or not np.isfinite(trial) or not lo_edge <= trial <= hi_edge:
                trial = lo + 0.5 * width
            if abs(width) < 1e-16 * max(1.0, abs(lo)):
                return None
            f, dg, g = self._phi(trial)
            if not np.isfinite(f) or not self._armijo_ok(trial, f) or f >= f_lo:
                hi, f_hi, dg_hi = trial, f, dg
                continue
            if self._curvature_ok(dg):
                return trial, f, g
            if dg * (hi - lo) >= 0:
                hi, f_hi, dg_hi = lo, f_lo, dg_lo
            lo, f_lo, dg_lo = trial, f, dg
        return None


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize(fun: Objective, start, config: OptimizerConfig | None = None) -> OptimizationResult:
    """Minimize ``fun`` (returning value and gradient) from ``start``.

    Raises
    ------
    ValueError
        If the objective is not finite at the starting point.
    """
    config = config or OptimizerConfig()
    x = np.array(start, dtype=float)
    f, g = fun(x)
    f = float(f)
    g = np.array(g, dtype=float)
    if not _finite(f, g):
        raise ValueError("objective is not finite at the start point")
    evals = 1
    pairs: deque = deque(maxlen=config.memory_pairs)
    reason = Termination.MAX_ITERATIONS
    iteration = 0
    while True:
        if np.max(np.abs(g), initial=0.0) < config.gradient_tolerance:
            reason = Termination.GRADIENT_SMALL
            break
        if iteration >= config.max_iterations:
            reason = Termination.MAX_ITERATIONS
            break
        if pairs:
            d = -_two_loop(g, pairs)
            alpha0 = 1.0
        else:
            d = -g
            alpha0 = min(1.0, 1.0 / np.linalg.norm(g))
        if not g @ d < 0:
            pairs.clear()
            d = -g
            alpha0 = min(1.0, 1.0 / np.linalg.norm(g))
        ls = _LineSearch(fun, x, f, g, d, config.wolfe_c1, config.wolfe_c2,
                         config.max_line_search_evals)
        found = ls.search(alpha0)
        evals += ls.evals
        if found is None and pairs:
            # stale curvature information; retry once along steepest descent
            pairs.clear()
            d = -g
            ls = _LineSearch(fun, x, f, g, d, config.wolfe_c1, config.wolfe_c2,
                             config.max_line_search_evals)
            found = ls.search(min(1.0, 1.0 / np.linalg.norm(g)))
            evals += ls.evals
        if found is None:
            reason = Termination.LINE_SEARCH_FAILED
            break
        alpha, f_new, g_new = found
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        iteration += 1
    return OptimizationResult(
        best_point=x,
        best_value=f,
        best_gradient=g,
        iterations_used=iteration,
        evaluations=evals,
        converged=reason is Termination.GRADIENT_SMALL,
        termination_reason=reason,
    )


def check_gradient(fun: Objective, point, step: float = 1e-5, floor: float = 1e-6) -> float:
    """Worst relative error between the analytic and central-difference gradient.

    The error per coordinate is ``|g - fd| / max(|fd|, floor)``; ``floor``
    keeps coordinates whose true derivative vanishes from dominating.
    """
    x = np.array(point, dtype=float)
    _, g = fun(x)
    g = np.asarray(g, dtype=float)
    worst = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fp, _ = fun(x + e)
        fm, _ = fun(x - e)
        fd = (fp - fm) / (2.0 * step)
        scale = max(abs(fd), floor)
        worst = max(worst, abs(g[i] - fd) / scale)
    return worst
