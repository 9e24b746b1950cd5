"""Experiment configuration, execution and reporting."""

from .config import KINDS, ConfigError, ExperimentConfig, load_config, parse_config, validate
from .experiments import EXPERIMENTS, Metric
from .runner import ResultRecord, load_records, report, run

__all__ = [
    "KINDS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "validate",
    "EXPERIMENTS",
    "Metric",
    "ResultRecord",
    "load_records",
    "report",
    "run",
]
