"""
DigiWFS Unwrap - Least-squares (Poisson equation) unwrapping

Wrapped first differences are taken as the gradient of the unwrapped phase
and the discrete Poisson equation is solved with Neumann boundaries. On a full
aperture the cosine transform diagonalizes the Neumann Laplacian; on a partial
aperture the same least-squares problem is solved on the aperture pixels only
with the sparse zonal solver.

Functions:
    poisson_rhs: Divergence of the wrapped gradient
    solve_poisson_dct: Neumann Poisson solve by cosine transform
    unwrap_pe: Least-squares unwrapping
"""

import logging

import numpy as np
from scipy.fft import dctn, idctn

from backend.optics.grid import PhaseGrid
from backend.optics.propagation import wrap_values
from backend.reconstruction.zonal import solve_edge_differences

logger = logging.getLogger(__name__)


def poisson_rhs(values: np.ndarray) -> np.ndarray:
    """Divergence of the wrapped first differences, zero flux across the border."""
    dx = wrap_values(np.diff(values, axis=1))
    dy = wrap_values(np.diff(values, axis=0))
    return np.diff(dx, axis=1, prepend=0, append=0) + np.diff(dy, axis=0, prepend=0, append=0)


def solve_poisson_dct(rho: np.ndarray) -> np.ndarray:
    """
    Solve the Neumann Poisson equation lap(phi) = rho.

    Args:
        rho (np.ndarray): Right-hand side, N x M

    Returns:
        np.ndarray: Zero-mean solution
    """
    rows, cols = rho.shape
    i, j = np.ogrid[0:rows, 0:cols]
    denominator = 2.0 * (np.cos(np.pi * i / rows) + np.cos(np.pi * j / cols) - 2.0)
    denominator[0, 0] = 1.0
    spectrum = dctn(rho, norm="ortho") / denominator
    spectrum[0, 0] = 0.0
    return idctn(spectrum, norm="ortho")


def unwrap_pe(pw: PhaseGrid) -> PhaseGrid:
    """
    Least-squares unwrapping.

    Args:
        pw (PhaseGrid): Wrapped phase

    Returns:
        PhaseGrid: Piston-free unwrapped phase
    """
    if pw.mask.all():
        values = solve_poisson_dct(poisson_rhs(pw.values))
        return pw.with_values(values - values.mean())

    pw.require_mask()
    wrapped = pw.masked()
    dx = wrap_values(np.diff(wrapped, axis=1))
    dy = wrap_values(np.diff(wrapped, axis=0))
    values, info = solve_edge_differences(pw.mask, dx, dy)
    logger.debug(f"Masked least-squares unwrap: {info['components']} components, "
                 f"residual {info['edge_residual_rms']:.3g}")
    return pw.with_values(values)
