"""
DigiWFS Unwrap - Heatmap export

Grayscale PNG views of phase grids. Values inside the aperture are mapped
linearly from the frame minimum (black) to the frame maximum (white); pixels
outside the aperture are black. The value range goes to a sidecar text file.
"""

import logging
import os
from typing import Tuple

import numpy as np
from PIL import Image

from backend.errors import GridIOError
from backend.optics.grid import PhaseGrid
from backend.optics.grid_io import write_bytes_atomic

logger = logging.getLogger(__name__)


def heatmap_pixels(grid: PhaseGrid) -> Tuple[np.ndarray, float, float]:
    """
    8-bit grayscale levels of a grid.

    Returns:
        Tuple[np.ndarray, float, float]: (levels, vmin, vmax)
    """
    inside = grid.values[grid.mask] if grid.mask.any() else grid.values.ravel()
    vmin = float(inside.min())
    vmax = float(inside.max())
    span = vmax - vmin if vmax > vmin else 1.0
    scaled = np.clip((grid.values - vmin) / span, 0.0, 1.0)
    levels = np.where(grid.mask, np.round(scaled * 255.0), 0.0).astype(np.uint8)
    return levels, vmin, vmax


def write_heatmap(grid: PhaseGrid, path: str) -> str:
    """
    Save a PNG heatmap and its ``.txt`` colorbar sidecar.

    Args:
        grid (PhaseGrid): Grid to render
        path (str): PNG path

    Returns:
        str: The PNG path
    """
    levels, vmin, vmax = heatmap_pixels(grid)
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        Image.fromarray(levels, mode="L").save(path, format="PNG")
    except OSError as e:
        raise GridIOError(f"Cannot write heatmap {path}: {str(e)}") from e
    sidecar = os.path.splitext(path)[0] + ".txt"
    write_bytes_atomic(sidecar, f"colormap=gray\nvmin={vmin:.12g}\nvmax={vmax:.12g}\n".encode("utf-8"))
    logger.info(f"Wrote heatmap to {path}")
    return path
