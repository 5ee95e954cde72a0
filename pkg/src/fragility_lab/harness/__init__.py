"""Seeded experiment orchestration, aggregation and file output."""

from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentResult,
    RunRecord,
    ShortfallWarning,
    SummaryTable,
    aggregate_rows,
    execute_run,
    run_experiment,
    summarize,
)
from .reproduce import NAMES, default_config, reproduce, to_csv

__all__ = [
    "EXPERIMENTS",
    "NAMES",
    "ExperimentConfig",
    "ExperimentResult",
    "RunRecord",
    "ShortfallWarning",
    "SummaryTable",
    "aggregate_rows",
    "default_config",
    "execute_run",
    "reproduce",
    "run_experiment",
    "summarize",
    "to_csv",
]
