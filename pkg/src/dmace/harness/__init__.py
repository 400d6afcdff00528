"""Sweeps, scenario configuration and the command line interface."""

from dmace.harness.config import ALGORITHMS, AXES, ExperimentConfig, stable_hash
from dmace.harness.pipeline import (
    PointData,
    evaluate_fista,
    evaluate_model,
    multi_pilot_observe,
    prepare_point,
    stacked_observation,
    train_model,
    tune_fista,
    untrained_nmse,
    zero_nmse,
)
from dmace.harness.sweep import CSV_COLUMNS, SweepResult, axis_points, convergence_report, nmse_table, run_sweep
from dmace.metrics import mean_nmse, nmse, to_db

__all__ = [
    "ALGORITHMS",
    "AXES",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "PointData",
    "SweepResult",
    "axis_points",
    "convergence_report",
    "evaluate_fista",
    "evaluate_model",
    "mean_nmse",
    "multi_pilot_observe",
    "nmse",
    "nmse_table",
    "prepare_point",
    "run_sweep",
    "stable_hash",
    "stacked_observation",
    "to_db",
    "train_model",
    "tune_fista",
    "untrained_nmse",
    "zero_nmse",
]
