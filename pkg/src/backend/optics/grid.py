"""
DigiWFS Unwrap - Grid types

This module holds the value types every other module passes around: phase
samples with their aperture mask, complex fields, and aperture descriptions.

Classes:
    PhaseGrid: Real phase samples (radians) with an aperture mask
    ComplexField: Complex field samples
    ApertureSpec: Parametric aperture (disc, square or full)

Functions:
    centered_coordinates: Pixel coordinates with the origin at index N/2
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from backend.errors import GridValidationError, UsageError

logger = logging.getLogger(__name__)

APERTURE_KINDS = ("disc", "square", "full")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def centered_coordinates(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pixel coordinates centred on the DFT origin.

    Args:
        n (int): Grid size

    Returns:
        Tuple[np.ndarray, np.ndarray]: (x, y) arrays of shape (n, n); x runs
        along axis 1 and y along axis 0, both zero at index n // 2
    """
    axis = np.arange(n, dtype=float) - n // 2
    y, x = np.meshgrid(axis, axis, indexing="ij")
    return x, y


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """
    Phase samples on a square N x N grid.

    ``values`` and ``mask`` are stored as read-only copies. Pixels outside the
    mask are kept as given; :meth:`masked` zeroes them.
    """

    values: np.ndarray
    mask: Optional[np.ndarray] = None
    pitch: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise GridValidationError(f"Phase grid must be square, got shape {values.shape}")
        n = values.shape[0]
        if n < 4 or n % 2:
            raise GridValidationError(f"Grid size must be even and at least 4, got {n}")
        if not np.all(np.isfinite(values)):
            raise GridValidationError("Phase grid contains non-finite values")
        if self.mask is None:
            mask = np.ones((n, n), dtype=bool)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise GridValidationError(f"Mask shape {mask.shape} does not match grid shape {values.shape}")
        if not self.pitch > 0:
            raise GridValidationError(f"Pitch must be positive, got {self.pitch}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def mask_count(self) -> int:
        return int(self.mask.sum())

    def masked(self) -> np.ndarray:
        """Values with out-of-aperture pixels set to 0."""
        return np.where(self.mask, self.values, 0.0)

    def with_values(self, values: np.ndarray) -> "PhaseGrid":
        """New grid with the same mask and pitch."""
        return PhaseGrid(values, self.mask, self.pitch)

    def require_mask(self) -> None:
        if not self.mask.any():
            raise GridValidationError("Aperture mask is empty")


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex field samples on a square grid."""

    data: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise GridValidationError(f"Field must be square, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise GridValidationError("Field contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_parts(cls, re: np.ndarray, im: np.ndarray, pitch: float = 1.0) -> "ComplexField":
        return cls(np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float), pitch)

    @property
    def re(self) -> np.ndarray:
        return self.data.real

    @property
    def im(self) -> np.ndarray:
        return self.data.imag

    @property
    def n(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class ApertureSpec:
    """
    Parametric aperture.

    Args:
        kind (str): One of ``disc``, ``square`` or ``full``
        diameter_px (int): Disc diameter or square side in pixels (ignored for full)
    """

    kind: str = "disc"
    diameter_px: int = 0

    def __post_init__(self):
        if self.kind not in APERTURE_KINDS:
            raise UsageError(f"Unknown aperture kind '{self.kind}'", key="aperture")
        if self.kind != "full" and self.diameter_px < 1:
            raise UsageError(f"Aperture diameter must be at least 1 pixel, got {self.diameter_px}", key="diameter")

    def mask(self, n: int) -> np.ndarray:
        """
        Rasterize the aperture on an n x n grid.

        The disc is centred on the geometric grid centre so that the mask is
        symmetric under a 180 degree rotation.
        """
        if self.kind == "full":
            return np.ones((n, n), dtype=bool)
        if self.diameter_px > n:
            raise UsageError(f"Aperture diameter {self.diameter_px} exceeds grid size {n}", key="diameter")
        if self.kind == "square":
            start = (n - self.diameter_px) // 2
            mask = np.zeros((n, n), dtype=bool)
            mask[start:start + self.diameter_px, start:start + self.diameter_px] = True
            return mask
        axis = np.arange(n) - (n - 1) / 2.0
        yy, xx = np.meshgrid(axis, axis, indexing="ij")
        return xx ** 2 + yy ** 2 <= (self.diameter_px / 2.0) ** 2
