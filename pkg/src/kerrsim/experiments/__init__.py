"""Experiment configuration, pipelines and regression comparison."""

from .compare import IncompatibleRuns, compare
from .config import ExperimentConfig, parse_number
from .runner import NumericalFailure, RunResult, export_raster, run

__all__ = [
    "ExperimentConfig",
    "IncompatibleRuns",
    "NumericalFailure",
    "RunResult",
    "compare",
    "export_raster",
    "parse_number",
    "run",
]
