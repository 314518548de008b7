"""
DigiWFS Unwrap - Linear four-sided pyramid reconstructor

Quad-cell slope extraction from the four pupil images followed by zonal
least-squares integration at pixel resolution. The response of the slope
signals to the phase gradient is calibrated per pixel with two small calibration
tilts; calibrations are cached per (N, c, aperture, modulation).

Classes:
    PyramidCalibration: Pupil registration, reference signals and gain maps

Functions:
    check_pupil_separation: Reject geometries where the pupil images overlap
    calibrate_p4: Build (or fetch) the calibration for a geometry
    quad_signals: Normalized slope-like signals of a detector frame
    linear_reconstruct_p4: Detector frame to phase
"""

import logging
import threading
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from backend.errors import GridValidationError
from backend.optics.grid import PhaseGrid, centered_coordinates
from backend.reconstruction.zonal import integrate_gradients
from backend.sensors.fourier import ModulationSpec, ShapeFunction, aperture_extent, modulated_intensity

logger = logging.getLogger(__name__)

CALIBRATION_PEAK = 0.1
GAIN_FLOOR = 0.05
SEPARATION_TOLERANCE_PX = 1.0

_calibrations: Dict[Tuple, "PyramidCalibration"] = {}
_calibration_lock = threading.Lock()


@dataclass(frozen=True, eq=False)
class PyramidCalibration:
    """Everything needed to turn a pyramid frame into gradients."""

    mask: np.ndarray
    # (row, col) sampling coordinates of the four images, each (2, #mask)
    samples: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    reference_x: np.ndarray
    reference_y: np.ndarray
    gain_x: np.ndarray
    gain_y: np.ndarray

    @property
    def mean_gain(self) -> Tuple[float, float]:
        return float(np.mean(self.gain_x)), float(np.mean(self.gain_y))


def check_pupil_separation(mask: np.ndarray, c: float) -> None:
    """
    Ensure the four pupil images neither overlap nor wrap around.

    Images sit c N / (2 pi) pixels from the pupil centre along each axis.

    Args:
        mask (np.ndarray): Aperture mask
        c (float): Apex constant
    """
    n = mask.shape[0]
    radius = aperture_extent(mask) / 2.0
    shift = c * n / (2.0 * np.pi)
    if shift + SEPARATION_TOLERANCE_PX < radius or shift + radius > n / 2.0 + SEPARATION_TOLERANCE_PX:
        needed = 2.0 * np.pi * radius / n
        raise GridValidationError(
            f"Pupil images overlap for c={c:g} and aperture diameter {2 * radius:g} on a {n}px grid; "
            f"use c >= {needed:.3g} with c*N/(2*pi) + D/2 <= N/2, or a smaller pupil"
        )


def _pupil_centres(frame: np.ndarray) -> Dict[str, Tuple[float, float]]:
    n = frame.shape[0]
    half = n // 2
    rows, cols = np.mgrid[0:half, 0:half]
    centres = {}
    quadrants = {
        "x+y+": (slice(half, n), slice(half, n)),
        "x-y+": (slice(half, n), slice(0, half)),
        "x-y-": (slice(0, half), slice(0, half)),
        "x+y-": (slice(0, half), slice(half, n)),
    }
    for name, (rs, cs) in quadrants.items():
        block = frame[rs, cs]
        weights = np.where(block > 0.1 * block.max(), block, 0.0)
        total = weights.sum()
        centres[name] = (rs.start + float((rows * weights).sum() / total),
                         cs.start + float((cols * weights).sum() / total))
    return centres


def _sample(frame: np.ndarray, calibration: PyramidCalibration) -> Tuple[np.ndarray, ...]:
    return tuple(map_coordinates(frame, coords, order=1, mode="grid-wrap") for coords in calibration.samples)


def _signals(frame: np.ndarray, calibration: PyramidCalibration) -> Tuple[np.ndarray, np.ndarray]:
    i1, i2, i3, i4 = _sample(frame, calibration)
    i0 = float(np.mean(i1 + i2 + i3 + i4))
    if not i0 > 0:
        raise GridValidationError("Pyramid frame carries no light inside the pupil images")
    return (i1 + i4 - i2 - i3) / i0, (i1 + i2 - i3 - i4) / i0


def _floored(gain: np.ndarray) -> np.ndarray:
    floor = GAIN_FLOOR * np.abs(gain).max()
    sign = np.where(gain < 0, -1.0, 1.0)
    return np.where(np.abs(gain) < floor, sign * floor, gain)


def _build_calibration(mask: np.ndarray, c: float, modulation: Optional[ModulationSpec]) -> PyramidCalibration:
    sf = ShapeFunction("pyramid4", c)
    flat = PhaseGrid(np.zeros(mask.shape), mask)
    frame = modulated_intensity(flat, sf, modulation)

    centres = _pupil_centres(frame)
    pupil_rows, pupil_cols = np.nonzero(mask)
    offset_rows = pupil_rows - pupil_rows.mean()
    offset_cols = pupil_cols - pupil_cols.mean()
    samples = tuple(
        np.stack([centres[name][0] + offset_rows, centres[name][1] + offset_cols])
        for name in ("x+y+", "x-y+", "x-y-", "x+y-")
    )
    partial = PyramidCalibration(mask, samples, np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))
    reference_x, reference_y = _signals(frame, partial)

    x, y = centered_coordinates(mask.shape[0])
    x = x - x[mask].mean()
    y = y - y[mask].mean()
    gains = []
    for pattern, reference, axis in ((x, reference_x, 0), (y, reference_y, 1)):
        slope = CALIBRATION_PEAK / np.abs(pattern[mask]).max()
        response = _signals(modulated_intensity(flat.with_values(slope * pattern), sf, modulation), partial)[axis]
        gains.append(_floored((response - reference) / slope))

    calibration = PyramidCalibration(mask, samples, reference_x, reference_y, gains[0], gains[1])
    logger.debug(f"Pyramid calibration for c={c:g}: mean gains {calibration.mean_gain}")
    return calibration


def calibrate_p4(mask: np.ndarray, c: float, modulation: Optional[ModulationSpec] = None) -> PyramidCalibration:
    """
    Calibration for a geometry, computed once and cached.

    Args:
        mask (np.ndarray): Aperture mask
        c (float): Apex constant
        modulation (ModulationSpec, optional): Modulation used by the frames

    Returns:
        PyramidCalibration: Cached calibration
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise GridValidationError("Aperture mask is empty")
    check_pupil_separation(mask, c)
    mod_key = (modulation.radius, modulation.steps) if modulation is not None and modulation.active else None
    key = (mask.shape[0], float(c), mask.tobytes(), mod_key)
    with _calibration_lock:
        cached = _calibrations.get(key)
    if cached is not None:
        return cached
    calibration = _build_calibration(mask, c, modulation)
    with _calibration_lock:
        _calibrations.setdefault(key, calibration)
        return _calibrations[key]


def quad_signals(frame: np.ndarray, calibration: PyramidCalibration) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference-subtracted slope-like signals on the pupil pixels.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (Sx, Sy) as flat arrays over the mask
    """
    sx, sy = _signals(np.asarray(frame, dtype=float), calibration)
    return sx - calibration.reference_x, sy - calibration.reference_y


def reconstruct_p4(frame: np.ndarray, mask: np.ndarray, c: float,
                   modulation: Optional[ModulationSpec] = None) -> Tuple[PhaseGrid, Dict[str, Any]]:
    """linear_reconstruct_p4 returning solver diagnostics as well."""
    frame = np.asarray(frame, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if frame.shape != mask.shape:
        raise GridValidationError(f"Frame shape {frame.shape} does not match mask shape {mask.shape}")
    calibration = calibrate_p4(mask, c, modulation)
    sx, sy = quad_signals(frame, calibration)

    gx = np.zeros(mask.shape)
    gy = np.zeros(mask.shape)
    gx[mask] = sx / calibration.gain_x
    gy[mask] = sy / calibration.gain_y
    values, info = integrate_gradients(gx, gy, mask)

    gain_x, gain_y = calibration.mean_gain
    diagnostics = {
        "c": c,
        "calibration_gain_x": gain_x,
        "calibration_gain_y": gain_y,
        "components": info["components"],
        "gradient_residual_rms": info["edge_residual_rms"],
    }
    return PhaseGrid(values, mask), diagnostics


def linear_reconstruct_p4(frame: np.ndarray, mask: np.ndarray, c: float,
                          modulation: Optional[ModulationSpec] = None) -> PhaseGrid:
    """
    Phase from a four-sided pyramid frame by linear slope reconstruction.

    Args:
        frame (np.ndarray): Detector intensity, N x N
        mask (np.ndarray): Aperture mask
        c (float): Apex constant of the pyramid
        modulation (ModulationSpec, optional): Modulation the frame was taken with

    Returns:
        PhaseGrid: Piston-free phase on the aperture
    """
    return reconstruct_p4(frame, mask, c, modulation)[0]
