"""Distributed sketch-and-average solvers for least-squares and minimum-norm problems."""

from .errors import SketchAvgError
from .linalg import fwht, leverage_scores, lstsq_solve, minnorm_solve, residual_cost
from .sketch import SketchKind, SketchSpec, apply_left, apply_right, draw, materialize
from .solver import (
    AveragedEstimate,
    Deadline,
    ExponentialDelay,
    FirstK,
    FixedDelays,
    Mode,
    WaitAll,
    WorkerOutput,
    decompose_error_mc,
    run_distributed,
    worker_solve_left,
    worker_solve_right,
)

__version__ = "0.1.0"

__all__ = [
    "AveragedEstimate",
    "Deadline",
    "ExponentialDelay",
    "FirstK",
    "FixedDelays",
    "Mode",
    "SketchAvgError",
    "SketchKind",
    "SketchSpec",
    "WaitAll",
    "WorkerOutput",
    "apply_left",
    "apply_right",
    "decompose_error_mc",
    "draw",
    "fwht",
    "leverage_scores",
    "lstsq_solve",
    "materialize",
    "minnorm_solve",
    "residual_cost",
    "run_distributed",
    "worker_solve_left",
    "worker_solve_right",
]
