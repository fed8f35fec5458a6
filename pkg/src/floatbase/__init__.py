"""Trajectory optimization for floating-base multibody systems under five
interchangeable floating-base parameterizations."""

from . import bench, charts, cli, diff, errors, liegroups, rbd, se3chain, \
    solver, transcription
from .charts import ALL_CHARTS, ChartKind
from .solver import SolveStats, SolverOptions, solve

__all__ = [
    "bench",
    "charts",
    "cli",
    "diff",
    "errors",
    "liegroups",
    "rbd",
    "se3chain",
    "solver",
    "transcription",
    "ALL_CHARTS",
    "ChartKind",
    "SolveStats",
    "SolverOptions",
    "solve",
]

__version__ = "0.1.0"
