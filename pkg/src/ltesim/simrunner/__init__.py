"""Experiment orchestration: config, seeded drops, result tables and the CLI."""

from .config import ExperimentConfig, load_config
from .experiments import (run_cfo, run_das, run_experiment, run_femto, run_mu_gain,
                          run_pilot_power)
from .results import ResultTable, emit_results, read_results

__all__ = [
    "ExperimentConfig", "load_config", "run_experiment", "run_mu_gain", "run_das",
    "run_femto", "run_cfo", "run_pilot_power", "ResultTable", "emit_results", "read_results",
]
