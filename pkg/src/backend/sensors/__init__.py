"""
DigiWFS Unwrap - Sensors module

Digital Shack-Hartmann and Fourier-type wavefront sensors.
"""

from backend.sensors.fourier import (
    LOW_CONFIDENCE_KINDS,
    SHAPE_KINDS,
    ModulationSpec,
    ShapeFunction,
    eval_shape,
    frequency_grid,
    modulated_intensity,
    sensor_intensity,
    transfer_function,
)
from backend.sensors.shack_hartmann import (
    SlopeField,
    SubapertureLayout,
    build_layout,
    centroid_slopes,
    integrate_slopes,
    subaperture_field,
    subimage_fields,
    unwrap_sh,
)

__all__ = [
    "LOW_CONFIDENCE_KINDS",
    "SHAPE_KINDS",
    "ModulationSpec",
    "ShapeFunction",
    "eval_shape",
    "frequency_grid",
    "modulated_intensity",
    "sensor_intensity",
    "transfer_function",
    "SlopeField",
    "SubapertureLayout",
    "build_layout",
    "centroid_slopes",
    "integrate_slopes",
    "subaperture_field",
    "subimage_fields",
    "unwrap_sh",
]
