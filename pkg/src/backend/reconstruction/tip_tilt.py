"""
DigiWFS Unwrap - Tip-tilt pre-compensation

A digital counterpart of the tip-tilt mirror in front of a pyramid sensor.
The mean wrapped gradient over the aperture is measured as the argument of
the summed neighbour phasors, which is exact for a plane phase of less than
pi per pixel. The plane is removed from the phasor before sensing and added
back to the reconstruction, so large global tilts never leave the sensor's
linear range.

Functions:
    estimate_tilt: Mean wrapped gradient along both axes
    tilt_plane: Plane phase for given slopes
    remove_tilt: Wrapped phase with its mean tilt removed
"""

import logging
from typing import Tuple

import numpy as np

from backend.errors import GridValidationError
from backend.optics.grid import PhaseGrid, centered_coordinates
from backend.optics.propagation import wrap_values

logger = logging.getLogger(__name__)


def _mean_phasor_slope(values: np.ndarray, mask: np.ndarray, axis: int) -> float:
    pairs = mask & np.roll(mask, -1, axis=axis)
    # np.roll wraps around; the last row/column never pairs with the first
    edge = [slice(None), slice(None)]
    edge[axis] = -1
    pairs[tuple(edge)] = False
    if not pairs.any():
        return 0.0
    steps = np.roll(values, -1, axis=axis) - values
    return float(np.angle(np.sum(np.exp(1j * steps[pairs]))))


def estimate_tilt(pw: PhaseGrid) -> Tuple[float, float]:
    """
    Mean wrapped gradient of a phase over its aperture.

    Args:
        pw (PhaseGrid): Wrapped (possibly noisy) phase

    Returns:
        Tuple[float, float]: (slope_x, slope_y) in rad per pixel, x along axis 1
    """
    pw.require_mask()
    values = np.asarray(pw.values, dtype=float)
    if not np.all(np.isfinite(values[pw.mask])):
        raise GridValidationError("Phase must be finite inside the aperture")
    return _mean_phasor_slope(values, pw.mask, 1), _mean_phasor_slope(values, pw.mask, 0)


def tilt_plane(n: int, slope_x: float, slope_y: float) -> np.ndarray:
    x, y = centered_coordinates(n)
    return slope_x * x + slope_y * y


def remove_tilt(pw: PhaseGrid) -> Tuple[PhaseGrid, np.ndarray, Tuple[float, float]]:
    """
    Remove the mean tilt of a wrapped phase.

    Args:
        pw (PhaseGrid): Wrapped phase

    Returns:
        Tuple[PhaseGrid, np.ndarray, Tuple[float, float]]: (wrapped residual, removed
        plane, slopes); adding the plane to an unwrapped residual restores the
        phase up to piston
    """
    slope_x, slope_y = estimate_tilt(pw)
    plane = tilt_plane(pw.n, slope_x, slope_y)
    logger.debug(f"Removing tilt ({slope_x:.4f}, {slope_y:.4f}) rad/px before sensing")
    return pw.with_values(wrap_values(pw.values - plane)), plane, (slope_x, slope_y)
