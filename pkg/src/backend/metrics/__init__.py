"""
DigiWFS Unwrap - Metrics module
"""

from backend.metrics.evaluation import (
    MetricReport,
    count_residues,
    evaluate,
    ms_ssim,
    relative_error,
    rewrap_residual,
    ssim,
)

__all__ = [
    "MetricReport",
    "count_residues",
    "evaluate",
    "ms_ssim",
    "relative_error",
    "rewrap_residual",
    "ssim",
]
