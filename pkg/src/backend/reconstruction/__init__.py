"""
DigiWFS Unwrap - Reconstruction module

Zonal integration, the linear pyramid reconstructor, the nonlinear
intensity-matching reconstructor, tip-tilt pre-compensation and the
Fourier-type unwrapping pipeline.
"""

from backend.reconstruction.fourier_pipeline import unwrap_fourier, unwrap_roof
from backend.reconstruction.nonlinear import (
    NopeOptions,
    nonlinear_reconstruct,
    objective_and_gradient,
    precondition,
    solve_nonlinear,
)
from backend.reconstruction.pyramid_linear import calibrate_p4, linear_reconstruct_p4, reconstruct_p4
from backend.reconstruction.tip_tilt import estimate_tilt, remove_tilt, tilt_plane
from backend.reconstruction.zonal import extend_nodes, integrate_gradients, solve_edge_differences, upsample_nodes

__all__ = [
    "unwrap_fourier",
    "unwrap_roof",
    "NopeOptions",
    "nonlinear_reconstruct",
    "objective_and_gradient",
    "precondition",
    "solve_nonlinear",
    "calibrate_p4",
    "linear_reconstruct_p4",
    "reconstruct_p4",
    "estimate_tilt",
    "remove_tilt",
    "tilt_plane",
    "extend_nodes",
    "integrate_gradients",
    "solve_edge_differences",
    "upsample_nodes",
]
