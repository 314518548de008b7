"""
DigiWFS Unwrap - Baselines module

Classical unwrappers used for comparison: column-wise Itoh, reliability-guided
and least-squares (Poisson equation).
"""

from backend.baselines.itoh import unwrap_columnwise
from backend.baselines.poisson import poisson_rhs, solve_poisson_dct, unwrap_pe
from backend.baselines.reliability import reliability_map, unwrap_mrp

__all__ = [
    "unwrap_columnwise",
    "poisson_rhs",
    "solve_poisson_dct",
    "unwrap_pe",
    "reliability_map",
    "unwrap_mrp",
]
