"""Evaluation metrics, emissions and leaderboards."""

from tsa.metrics.carbon import ENGINE_TYPES, CarbonCoeffs, carbon_rate
from tsa.metrics.leaderboard import Leaderboard, mrr
from tsa.metrics.report import COLUMN_LABELS, DIRECTIONS, METRIC_COLUMNS, MetricsReport, compute_metrics

__all__ = [
    "COLUMN_LABELS",
    "CarbonCoeffs",
    "DIRECTIONS",
    "ENGINE_TYPES",
    "Leaderboard",
    "METRIC_COLUMNS",
    "MetricsReport",
    "carbon_rate",
    "compute_metrics",
    "mrr",
]
