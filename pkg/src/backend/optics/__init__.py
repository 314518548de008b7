"""
DigiWFS Unwrap - Optics module

Grid types, the wrapping operator, centred DFTs, pupil propagation and the
PGRID file format.
"""

from backend.optics.grid import ApertureSpec, ComplexField, PhaseGrid, centered_coordinates
from backend.optics.grid_io import load_grid, save_grid
from backend.optics.propagation import (
    dft2_centered,
    dft2c,
    field_power,
    idft2_centered,
    idft2c,
    intensity,
    phasor,
    pupil_field,
    wrap_phase,
    wrap_values,
)

__all__ = [
    "ApertureSpec",
    "ComplexField",
    "PhaseGrid",
    "centered_coordinates",
    "load_grid",
    "save_grid",
    "dft2_centered",
    "dft2c",
    "field_power",
    "idft2_centered",
    "idft2c",
    "intensity",
    "phasor",
    "pupil_field",
    "wrap_phase",
    "wrap_values",
]
