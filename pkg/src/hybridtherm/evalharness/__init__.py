"""Metrics, experiment drivers and the command line interface."""

from .experiments import (
    DEFAULT_WINDOWS,
    CellError,
    ExperimentPlan,
    ExplainStudy,
    build_tiers,
    default_boundary,
    explain_model,
    learner_input_names,
    rank_rows,
    run_data_quantity_sweep,
    run_explain_study,
    run_scenario_matrix,
    trailing_window,
)
from .metrics import MetricReport, MonthlyBreakdown, RoomMetrics, evaluate_arrays, mae, mape, monthly_breakdown, rmse

__all__ = [
    "DEFAULT_WINDOWS",
    "CellError",
    "ExperimentPlan",
    "ExplainStudy",
    "MetricReport",
    "MonthlyBreakdown",
    "RoomMetrics",
    "build_tiers",
    "default_boundary",
    "evaluate_arrays",
    "explain_model",
    "learner_input_names",
    "mae",
    "mape",
    "monthly_breakdown",
    "rank_rows",
    "rmse",
    "run_data_quantity_sweep",
    "run_explain_study",
    "run_scenario_matrix",
    "trailing_window",
]
