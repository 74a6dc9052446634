from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .results import ResultTable, emit_results, load_results, table_to_csv
from .runner import pseudo_point_count, run_experiment, run_scaling_study

__all__ = [
    "ConfigError", "ExperimentConfig", "ResultTable", "emit_results", "load_config",
    "load_results", "parse_config", "pseudo_point_count", "run_experiment",
    "run_scaling_study", "table_to_csv",
]
