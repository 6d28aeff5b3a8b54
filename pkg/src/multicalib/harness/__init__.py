"""Benchmark protocol: splits, groups, synthetic data and sweeps."""

from .groups import DEFAULT_GAMMA, GroupPredicate, build_groups
from .splits import CF_GRID_LARGE, CF_GRID_TABULAR, SplitSpec, Splits, make_splits
from .sweep import (
    MethodSpec,
    MetricsReport,
    PointSummary,
    RunResult,
    SweepResult,
    aggregate,
    evaluate,
    expand_grid,
    fit_method,
    method_grid,
    run_single,
    run_sweep,
    select_best,
    summarize,
)
from .synthetic import DEFAULT_SHIFTS, SyntheticGenerationError, SyntheticSpec, default_predicates, gen_synthetic

__all__ = [
    "CF_GRID_LARGE",
    "CF_GRID_TABULAR",
    "DEFAULT_GAMMA",
    "DEFAULT_SHIFTS",
    "GroupPredicate",
    "MethodSpec",
    "MetricsReport",
    "PointSummary",
    "RunResult",
    "SplitSpec",
    "Splits",
    "SweepResult",
    "SyntheticGenerationError",
    "SyntheticSpec",
    "aggregate",
    "build_groups",
    "default_predicates",
    "evaluate",
    "expand_grid",
    "fit_method",
    "gen_synthetic",
    "make_splits",
    "method_grid",
    "run_single",
    "run_sweep",
    "select_best",
    "summarize",
]
