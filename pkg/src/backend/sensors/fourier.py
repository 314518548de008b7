"""
DigiWFS Unwrap - Digital Fourier-type sensors

This module models sensors that place a phase-only optical element in the
focal plane: the incident field chi * exp(-i * phi) is transformed, multiplied
by exp(i * psi) and transformed back, and the detector records the intensity.
Optional circular modulation averages the intensity over a sweep of tilts.

Classes:
    ShapeFunction: Focal-plane element profile
    ModulationSpec: Circular modulation radius and sampling

Functions:
    frequency_grid: Centred frequency coordinates
    eval_shape: Evaluate a shape function on frequency coordinates
    transfer_function: exp(i * psi) on an N x N grid (cached)
    modulation_phases: Tilt phases of one modulation sweep
    sensor_intensity: Unmodulated detector intensity
    modulated_intensity: Time-averaged detector intensity
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from backend.errors import UsageError
from backend.optics.grid import PhaseGrid, centered_coordinates
from backend.optics.propagation import dft2c, idft2c, intensity, phasor

logger = logging.getLogger(__name__)

SHAPE_KINDS = ("pyramid4", "roof_x", "roof_y", "pyramid3", "cone", "iquad")
LOW_CONFIDENCE_KINDS = ("cone", "iquad")
SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class ShapeFunction:
    """
    Focal-plane element profile psi with apex constant c.

    ``c`` is in radians per frequency pixel; iquad ignores it.
    """

    kind: str = "pyramid4"
    c: float = np.pi / 2

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise UsageError(f"Unknown shape function '{self.kind}'", key="method")
        if not (np.isfinite(self.c) and self.c > 0):
            raise UsageError(f"Apex constant c must be positive, got {self.c}", key="c")


@dataclass(frozen=True)
class ModulationSpec:
    """
    Circular modulation.

    Args:
        radius (float): Sweep radius in units of lambda / D
        steps (int): Samples per modulation period
    """

    radius: float = 0.0
    steps: int = 16

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius >= 0):
            raise UsageError(f"Modulation radius must be non-negative, got {self.radius}", key="mod_radius")
        if int(self.steps) != self.steps or self.steps < 1:
            raise UsageError(f"Modulation steps must be a positive integer, got {self.steps}", key="mod_steps")

    @property
    def active(self) -> bool:
        return self.radius > 0


def frequency_grid(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Centred frequency coordinates in [-N/2, N/2).

    Returns:
        Tuple[np.ndarray, np.ndarray]: (xi1, xi2), xi1 along axis 1
    """
    return centered_coordinates(n)


def eval_shape(sf: ShapeFunction, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    """
    Evaluate psi pixel-wise.

    The three-sided pyramid is the continuous piecewise-linear profile
    c * min(-2 xi1, xi1 - sqrt(3) xi2, xi1 + sqrt(3) xi2), whose faces meet on
    the rays at polar angles pi/3, pi and -pi/3.

    Args:
        sf (ShapeFunction): Profile
        xi1 (np.ndarray): Frequencies along axis 1
        xi2 (np.ndarray): Frequencies along axis 0

    Returns:
        np.ndarray: psi values
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    c = sf.c
    if sf.kind == "roof_x":
        return c * np.abs(xi1)
    if sf.kind == "roof_y":
        return c * np.abs(xi2)
    if sf.kind == "pyramid4":
        return c * np.abs(xi1) + c * np.abs(xi2)
    if sf.kind == "cone":
        return c * np.hypot(xi1, xi2)
    if sf.kind == "iquad":
        return np.where(xi1 * xi2 < 0, np.pi / 2.0, 0.0)

    # theta runs from +xi1 towards +xi2; face gradients are c (-2, 0) on the
    # front sector, c (1, -sqrt3) above it and c (1, sqrt3) below it
    theta = np.arctan2(xi2, xi1)
    front = (theta >= -np.pi / 3.0) & (theta <= np.pi / 3.0)
    upper = (theta > np.pi / 3.0) & (theta <= np.pi)
    return np.where(front, -2.0 * c * xi1,
                    np.where(upper, c * (xi1 - SQRT3 * xi2), c * (xi1 + SQRT3 * xi2)))


@lru_cache(maxsize=64)
def _cached_transfer(kind: str, c: float, n: int) -> np.ndarray:
    xi1, xi2 = frequency_grid(n)
    otf = np.exp(1j * eval_shape(ShapeFunction(kind, c), xi1, xi2))
    otf.setflags(write=False)
    return otf


def transfer_function(sf: ShapeFunction, n: int) -> np.ndarray:
    """exp(i * psi) on the centred n x n frequency grid (read-only, cached)."""
    return _cached_transfer(sf.kind, float(sf.c), int(n))


def aperture_extent(mask: np.ndarray) -> int:
    """Bounding-box extent of the mask in pixels, used as the pupil diameter."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return 0
    return int(max(rows[-1] - rows[0] + 1, cols[-1] - cols[0] + 1))


def modulation_phases(mask: np.ndarray, mod: ModulationSpec) -> List[np.ndarray]:
    """
    Tilt phases of one modulation sweep.

    Sample m adds (2 pi r / D) (x1 cos 2 pi t_m + x2 sin 2 pi t_m) with
    t_m = m / steps and D the aperture extent.

    Args:
        mask (np.ndarray): Aperture mask
        mod (ModulationSpec): Modulation

    Returns:
        List[np.ndarray]: One phase array per sample
    """
    n = mask.shape[0]
    diameter = max(aperture_extent(mask), 1)
    x1, x2 = centered_coordinates(n)
    scale = 2.0 * np.pi * mod.radius / diameter
    phases = []
    for m in range(int(mod.steps)):
        angle = 2.0 * np.pi * m / mod.steps
        phases.append(scale * (x1 * np.cos(angle) + x2 * np.sin(angle)))
    return phases


def sensor_intensity(pw: PhaseGrid, sf: ShapeFunction) -> np.ndarray:
    """
    Detector intensity |idft(exp(i psi) dft(chi exp(-i pw)))|^2.

    Args:
        pw (PhaseGrid): Phase, wrapped or not
        sf (ShapeFunction): Focal-plane element

    Returns:
        np.ndarray: N x N intensity; its mean equals #mask / N^2
    """
    incident = phasor(pw, sign=-1.0)
    return intensity(idft2c(transfer_function(sf, pw.n) * dft2c(incident)))


def modulated_intensity(pw: PhaseGrid, sf: ShapeFunction, mod: Optional[ModulationSpec]) -> np.ndarray:
    """
    Modulated detector intensity.

    Averages sensor_intensity of pw plus each modulation tilt. A zero radius
    returns the unmodulated intensity unchanged.

    Args:
        pw (PhaseGrid): Phase, wrapped or not
        sf (ShapeFunction): Focal-plane element
        mod (ModulationSpec, optional): Modulation

    Returns:
        np.ndarray: N x N intensity
    """
    if mod is None or not mod.active:
        return sensor_intensity(pw, sf)
    total = np.zeros((pw.n, pw.n))
    for tilt in modulation_phases(pw.mask, mod):
        total += sensor_intensity(pw.with_values(pw.values + tilt), sf)
    return total / mod.steps
