"""
DigiWFS Unwrap - Reliability-guided unwrapping

Unwraps the most reliable pixels first along a non-continuous path. Pixel
reliability is the reciprocal of the root-sum-square of the wrapped second
differences in the horizontal, vertical and both diagonal directions; an edge
between two neighbours is as reliable as the sum of its endpoints. Edges are
visited in descending reliability and groups of pixels are merged with the
smaller group shifted by a multiple of 2*pi.

Functions:
    reliability_map: Per-pixel reliability
    unwrap_mrp: Reliability-guided unwrapping
"""

import logging
from typing import List

import numpy as np
from scipy.ndimage import minimum_filter

from backend.optics.grid import PhaseGrid
from backend.optics.propagation import TWO_PI, wrap_values

logger = logging.getLogger(__name__)

MIN_DISCONTINUITY = 1e-12


def reliability_map(values: np.ndarray) -> np.ndarray:
    """
    Reliability of every pixel.

    Border pixels have no complete second differences and take the smallest
    interior reliability found in their 3 x 3 neighbourhood.

    Args:
        values (np.ndarray): Wrapped phase, N x N

    Returns:
        np.ndarray: Finite positive reliabilities
    """
    v = np.asarray(values, dtype=float)
    centre = v[1:-1, 1:-1]

    def second(before, after):
        return wrap_values(before - centre) - wrap_values(centre - after)

    horizontal = second(v[1:-1, :-2], v[1:-1, 2:])
    vertical = second(v[:-2, 1:-1], v[2:, 1:-1])
    diagonal = second(v[:-2, :-2], v[2:, 2:])
    anti_diagonal = second(v[:-2, 2:], v[2:, :-2])
    discontinuity = np.sqrt(horizontal ** 2 + vertical ** 2 + diagonal ** 2 + anti_diagonal ** 2)

    interior = np.full(v.shape, np.inf)
    interior[1:-1, 1:-1] = 1.0 / np.maximum(discontinuity, MIN_DISCONTINUITY)
    border_fill = minimum_filter(interior, size=3, mode="constant", cval=np.inf)
    reliability = np.where(np.isfinite(interior), interior, border_fill)
    return reliability


def unwrap_mrp(pw: PhaseGrid) -> PhaseGrid:
    """
    Reliability-guided unwrapping.

    Edges are ordered by descending reliability; ties keep row-major order
    with each pixel's right edge before its down edge. Edges touching pixels
    outside the mask are ignored.

    Args:
        pw (PhaseGrid): Wrapped phase

    Returns:
        PhaseGrid: Unwrapped phase, congruent to the input modulo 2*pi
    """
    n = pw.n
    wrapped = pw.masked()
    reliability = reliability_map(wrapped)
    mask = pw.mask

    index = np.arange(n * n).reshape(n, n)
    # slot 2k holds the right edge of pixel k, slot 2k+1 its down edge
    first = np.full(2 * n * n, -1, dtype=np.int64)
    second = np.full(2 * n * n, -1, dtype=np.int64)
    weight = np.zeros(2 * n * n)

    right = mask[:, :-1] & mask[:, 1:]
    slots = 2 * index[:, :-1][right]
    first[slots] = index[:, :-1][right]
    second[slots] = index[:, 1:][right]
    weight[slots] = (reliability[:, :-1] + reliability[:, 1:])[right]

    down = mask[:-1, :] & mask[1:, :]
    slots = 2 * index[:-1, :][down] + 1
    first[slots] = index[:-1, :][down]
    second[slots] = index[1:, :][down]
    weight[slots] = (reliability[:-1, :] + reliability[1:, :])[down]

    used = np.flatnonzero(first >= 0)
    order = used[np.argsort(-weight[used], kind="stable")]

    unwrapped = wrapped.ravel().copy()
    group = np.arange(n * n)
    members: List[List[int]] = [[k] for k in range(n * n)]
    merges = 0

    for slot in order:
        a = first[slot]
        b = second[slot]
        ga = group[a]
        gb = group[b]
        if ga == gb:
            continue
        turns = np.round((unwrapped[a] - unwrapped[b]) / TWO_PI)
        if len(members[ga]) < len(members[gb]):
            ga, gb = gb, ga
            turns = -turns
        moved = np.asarray(members[gb])
        if turns:
            unwrapped[moved] += TWO_PI * turns
        group[moved] = ga
        members[ga].extend(members[gb])
        members[gb] = []
        merges += 1

    logger.debug(f"Reliability unwrapping merged {merges} groups over {used.size} edges")
    return pw.with_values(np.where(mask, unwrapped.reshape(n, n), 0.0))
