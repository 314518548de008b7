"""
DigiWFS Unwrap - Pipeline module

Run configuration, method dispatch, comparisons, progress tracking and
heatmap export used by the command line.
"""

from backend.pipeline.config import RunConfig, build_config, load_config, parse_method, save_config
from backend.pipeline.heatmap import write_heatmap
from backend.pipeline.progress_tracker import CompareProgressTracker
from backend.pipeline.runner import Case, CompareRow, compare, format_table, run_method, simulate_case

__all__ = [
    "RunConfig",
    "build_config",
    "load_config",
    "parse_method",
    "save_config",
    "write_heatmap",
    "CompareProgressTracker",
    "Case",
    "CompareRow",
    "compare",
    "format_table",
    "run_method",
    "simulate_case",
]
