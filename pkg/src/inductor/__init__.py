"""Iterative hypothesis refinement for inductive reasoning tasks."""

from .core import (
    Example,
    Failure,
    FormatError,
    Hypothesis,
    HypothesisForm,
    Method,
    RunConfig,
    Task,
    TaskKind,
    Value,
    ValueKind,
    normalize_output,
    parse_value,
    render_value,
    values_equal,
)
from .engine import RunTrace, io_predict, refine, run_task, sc_predict, sr_refine, task_accuracy
from .harness import ExperimentConfig, Report, aggregate, aggregate_records, cost_report, run

__version__ = "0.1.0"

__all__ = [
    "Example",
    "ExperimentConfig",
    "Failure",
    "FormatError",
    "Hypothesis",
    "HypothesisForm",
    "Method",
    "Report",
    "RunConfig",
    "RunTrace",
    "Task",
    "TaskKind",
    "Value",
    "ValueKind",
    "aggregate",
    "aggregate_records",
    "cost_report",
    "io_predict",
    "normalize_output",
    "parse_value",
    "refine",
    "render_value",
    "run",
    "run_task",
    "sc_predict",
    "sr_refine",
    "task_accuracy",
    "values_equal",
]
