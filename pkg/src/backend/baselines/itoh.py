"""
DigiWFS Unwrap - Column-wise Itoh unwrapping

One-dimensional unwrapping applied independently to every column: wrapped
first differences are summed cumulatively, so any jump larger than pi is
replaced by its 2*pi-congruent representative.
"""

import logging

import numpy as np

from backend.optics.grid import PhaseGrid

logger = logging.getLogger(__name__)


def unwrap_columnwise(pw: PhaseGrid) -> PhaseGrid:
    """
    Unwrap each column along axis 0.

    The first row is kept as is. Out-of-aperture pixels enter the recursion
    as zeros and are zeroed again in the output.

    Args:
        pw (PhaseGrid): Wrapped phase

    Returns:
        PhaseGrid: Column-wise unwrapped phase
    """
    values = np.unwrap(pw.masked(), axis=0)
    return pw.with_values(np.where(pw.mask, values, 0.0))
