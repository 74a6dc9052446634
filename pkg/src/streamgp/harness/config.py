"""Experiment configuration and its flat ``key = value`` file format.

Example::

    # synthetic run at desk scale
    field_source = synthetic
    field_seed = 3
    models = GPR, GPR500, VSGP, SPGP, SSGP
    num_pseudo = 30
    init_lengthscales = 1.0, 1.0

Blank lines and ``#`` comments are ignored. Sequences are comma separated.
Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..kernels import Hyperparameters
from ..optimize import OptimizerConfig

MODEL_PATTERN = re.compile(r"^(GPR|GPR\d+|VSGP|SPGP|SSGP)$")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    field_source: str = "synthetic"
    field_seed: int = 0
    csv_path: str | None = None
    width: int = 100
    height: int = 100
    field_signal_variance: float = 1.0
    field_lengthscales: tuple[float, ...] = (0.3, 0.7)
    noise_variance: float = 0.01
    transect_count: int = 44
    samples_per_transect: int = 98
    batch_size: int = 44
    max_batches: int | None = None
    models: tuple[str, ...] = ("GPR", "GPR500", "VSGP", "SPGP", "SSGP")
    num_pseudo: int = 30
    alpha: float | None = None
    log_base: float | None = None
    max_iterations: int = 100
    gradient_tolerance: float = 1e-5
    memory_pairs: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_lengthscale: float | None = 10.0
    init_signal_variance: float = 1.0
    init_lengthscales: tuple[float, ...] = (1.0, 1.0)
    init_noise_variance: float = 0.1
    seed: int = 0
    test_noise_seed: int = 12345
    output_path: str = "results"

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model is required")
        for name in self.models:
            if not MODEL_PATTERN.match(name):
                raise ConfigError(f"unknown model {name!r}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("duplicate model in list")
        if self.field_source not in ("synthetic", "csv"):
            raise ConfigError(f"field_source must be 'synthetic' or 'csv', not {self.field_source!r}")
        if self.field_source == "csv" and not self.csv_path:
            raise ConfigError("csv field source needs csv_path")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if (self.transect_count * self.samples_per_transect) % self.batch_size:
            raise ConfigError("transect_count * samples_per_transect must be a multiple of batch_size")
        for name in self.models:
            if name.startswith("GPR") and name != "GPR" and int(name[3:]) < self.batch_size:
                raise ConfigError(f"{name}: window smaller than batch_size")
        if self.num_pseudo < 1:
            raise ConfigError("num_pseudo must be positive")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if len(self.init_lengthscales) != 2 or len(self.field_lengthscales) != 2:
            raise ConfigError("two lengthscales are required")
        try:
            self.optimizer_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            max_iterations=self.max_iterations,
            gradient_tolerance=self.gradient_tolerance,
            memory_pairs=self.memory_pairs,
            wolfe_c1=self.wolfe_c1,
            wolfe_c2=self.wolfe_c2,
            max_lengthscale=self.max_lengthscale,
        )

    def init_hyperparameters(self) -> Hyperparameters:
        return Hyperparameters.from_values(
            self.init_signal_variance, self.init_lengthscales, self.init_noise_variance
        )

    def field_hyperparameters(self) -> Hyperparameters:
        return Hyperparameters.from_values(
            self.field_signal_variance, self.field_lengthscales, self.noise_variance
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_HINTS = typing.get_type_hints(ExperimentConfig)


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    args = typing.get_args(hint)
    optional = type(None) in args
    if optional:
        if raw.lower() in ("", "none"):
            return None
        hint = next(a for a in args if a is not type(None))
    origin = typing.get_origin(hint)
    try:
        if origin is tuple:
            (item,) = {a for a in typing.get_args(hint) if a is not Ellipsis}
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(item(p) for p in parts)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _HINTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(text, str(path))


def format_config(config: ExperimentConfig) -> str:
    """Render ``config`` in the format accepted by :func:`parse_config`."""
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ", ".join(str(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
