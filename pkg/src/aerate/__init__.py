"""Adaptive experimental design for average treatment effect estimation.

The package simulates sequential experiments in which each unit's treatment
probability is tuned from the data seen so far, estimates the effect with
martingale-based augmented IPW estimators, and tests it with fixed-horizon,
Bonferroni and anytime procedures.
"""

from __future__ import annotations

from .dgp import DatasetSpec, Observation, make_dataset, make_synthetic
from .engine import TrialConfig, TrialResult, run_hahn, run_trial
from .errors import (
    AerateError,
    ColdArmError,
    ConfigError,
    DataParseError,
    DegenerateInputError,
    DomainError,
    EmptyStateError,
    InsufficientDataError,
    ShapeError,
)
from .estimators import EstimatorState, a2ipw_increment, adaipw_increment
from .harness import AggregateReport, BenchConfig, Cell, emit_report, run_bench, sensitivity_sweep
from .policy import adaptive_pi, optimal_pi_aipw, optimal_pi_ipw
from .regressors import RegressorState
from .testing import TestConfig, lil_boundary, normal_quantile, z_test

__version__ = "0.1.0"

__all__ = [
    "AerateError", "AggregateReport", "BenchConfig", "Cell", "ColdArmError", "ConfigError",
    "DataParseError", "DatasetSpec", "DegenerateInputError", "DomainError", "EmptyStateError",
    "EstimatorState", "InsufficientDataError", "Observation", "RegressorState", "ShapeError",
    "TestConfig", "TrialConfig", "TrialResult", "a2ipw_increment", "adaipw_increment",
    "adaptive_pi", "emit_report", "lil_boundary", "make_dataset", "make_synthetic",
    "normal_quantile", "optimal_pi_aipw", "optimal_pi_ipw", "run_bench", "run_hahn",
    "run_trial", "sensitivity_sweep", "z_test",
]
