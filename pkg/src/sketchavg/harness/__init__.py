"""Experiment harness: synthetic data, config files, sweeps and the CLI."""

from .config import DataSpec, ExperimentConfig, ProblemSpec
from .experiment import DATA_COLUMNS, ExperimentResult, run_experiment
from .generate import GeneratorSpec, generate

__all__ = [
    "DATA_COLUMNS",
    "DataSpec",
    "ExperimentConfig",
    "ExperimentResult",
    "GeneratorSpec",
    "ProblemSpec",
    "generate",
    "run_experiment",
]
