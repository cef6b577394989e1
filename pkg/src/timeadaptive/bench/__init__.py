"""Experiment harness: grid search, irregularity sweeps and benchmark tables."""

from .config import ExperimentConfig
from .grid import GridResult, GridSearchError, grid_search
from .metrics import RunResult, accuracy, evaluate_metrics
from .sweep import SweepSettings, irregularity_sweep, run_sweep
from .tables import run_table1, run_table2

__all__ = [
    "ExperimentConfig",
    "GridResult",
    "GridSearchError",
    "grid_search",
    "RunResult",
    "accuracy",
    "evaluate_metrics",
    "SweepSettings",
    "irregularity_sweep",
    "run_sweep",
    "run_table1",
    "run_table2",
]
