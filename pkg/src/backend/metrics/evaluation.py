"""
DigiWFS Unwrap - Evaluation metrics

This module scores a reconstruction against a ground truth after removing the
in-aperture mean (piston) of both maps: relative L2 error, SSIM and
multi-scale SSIM on the aperture bounding box, the number of phase residues of
a wrapped map and, when no ground truth exists, the rewrap residual between a
reconstruction and the wrapped data.

Classes:
    MetricReport: All metrics of one reconstruction

Functions:
    relative_error: Piston-aligned relative L2 error in percent
    ssim: Structural similarity
    ms_ssim: Multi-scale structural similarity
    count_residues: Number of 2 x 2 loops with non-zero circulation
    rewrap_residual: RMS of the wrapped difference to the data
    evaluate: Build a MetricReport
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter
from skimage.metrics import structural_similarity

from backend.errors import GridValidationError
from backend.optics.grid import PhaseGrid
from backend.optics.propagation import wrap_phase, wrap_values

logger = logging.getLogger(__name__)

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5
SSIM_WINDOW = 2 * int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5) + 1
K1 = 0.01
K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
SSIM_NORMALIZATION = "piston_aligned;range=ptp(truth);region=aperture_bbox"


@dataclass
class MetricReport:
    """Scores of one reconstruction; ``runtime_ms`` stays out of :meth:`to_lines`."""

    rel_error: Optional[float] = None
    ssim: Optional[float] = None
    ms_ssim: Optional[float] = None
    residues: int = 0
    rewrap_residual: Optional[float] = None
    runtime_ms: float = 0.0

    def to_lines(self) -> List[str]:
        lines = [f"ssim_normalization={SSIM_NORMALIZATION}"]
        for key in ("rel_error", "ssim", "ms_ssim"):
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key}={value:.12g}")
        lines.append(f"residues={self.residues}")
        if self.rewrap_residual is not None:
            lines.append(f"rewrap_residual={self.rewrap_residual:.12g}")
        return lines


def _check_pair(rec: PhaseGrid, truth: PhaseGrid) -> np.ndarray:
    if rec.n != truth.n:
        raise GridValidationError(f"Grid sizes differ: {rec.n} vs {truth.n}")
    if not np.array_equal(rec.mask, truth.mask):
        raise GridValidationError("Reconstruction and truth use different aperture masks")
    truth.require_mask()
    return truth.mask


def _aligned(grid: PhaseGrid, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, grid.values - grid.values[mask].mean(), 0.0)


def relative_error(rec: PhaseGrid, truth: PhaseGrid) -> float:
    """
    100 * ||rec - <rec> - (truth - <truth>)|| / ||truth - <truth>|| over the aperture.

    Args:
        rec (PhaseGrid): Reconstruction
        truth (PhaseGrid): Ground truth on the same grid and mask

    Returns:
        float: Relative error in percent
    """
    mask = _check_pair(rec, truth)
    a = _aligned(rec, mask)[mask]
    b = _aligned(truth, mask)[mask]
    norm = float(np.linalg.norm(b))
    if norm == 0.0:
        raise GridValidationError("Ground truth has zero norm after piston removal")
    return 100.0 * float(np.linalg.norm(a - b)) / norm


def _bounding_box(mask: np.ndarray) -> Tuple[slice, slice]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)


def _prepared(rec: PhaseGrid, truth: PhaseGrid) -> Tuple[np.ndarray, np.ndarray, float]:
    mask = _check_pair(rec, truth)
    box = _bounding_box(mask)
    a = _aligned(rec, mask)[box]
    b = _aligned(truth, mask)[box]
    # scale from the truth only
    data_range = float(np.ptp(b))
    return a, b, data_range if data_range > 0 else 1.0


def _ssim_parts(a: np.ndarray, b: np.ndarray, data_range: float) -> Tuple[float, float]:
    """Mean SSIM and mean contrast-structure term with Gaussian weighting."""
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    def blur(x):
        return gaussian_filter(x, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    mu_a = blur(a)
    mu_b = blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    luminance = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return float(np.mean(luminance * cs)), float(np.mean(cs))


def ssim(rec: PhaseGrid, truth: PhaseGrid) -> float:
    """
    Gaussian-window SSIM (sigma 1.5, K1 0.01, K2 0.03).

    Args:
        rec (PhaseGrid): Reconstruction
        truth (PhaseGrid): Ground truth

    Returns:
        float: SSIM in [-1, 1]
    """
    a, b, data_range = _prepared(rec, truth)
    if min(a.shape) < SSIM_WINDOW:
        logger.warning(f"Aperture box {a.shape} is smaller than the {SSIM_WINDOW}px SSIM window; "
                       f"using reflected borders")
        return _ssim_parts(a, b, data_range)[0]
    return float(structural_similarity(a, b, data_range=data_range, gaussian_weights=True, sigma=SSIM_SIGMA,
                                       use_sample_covariance=False, K1=K1, K2=K2))


def _downsample(x: np.ndarray) -> np.ndarray:
    rows, cols = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:rows, :cols]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(rec: PhaseGrid, truth: PhaseGrid) -> float:
    """
    Multi-scale SSIM over up to five dyadic scales.

    Scales whose box is smaller than the SSIM window are dropped and the
    canonical weights are renormalized over the remaining ones. Negative
    components are clipped to zero.

    Returns:
        float: MS-SSIM in [0, 1]
    """
    a, b, data_range = _prepared(rec, truth)
    usable = 0
    side = min(a.shape)
    while usable < len(MS_SSIM_WEIGHTS) and side >= SSIM_WINDOW:
        usable += 1
        side //= 2
    if usable <= 1:
        logger.warning(f"Only one usable scale for MS-SSIM on a {a.shape} box; falling back to SSIM")
        return float(np.clip(ssim(rec, truth), 0.0, 1.0))

    weights = np.array(MS_SSIM_WEIGHTS[:usable])
    weights = weights / weights.sum()
    result = 1.0
    for level in range(usable):
        full, cs = _ssim_parts(a, b, data_range)
        term = full if level == usable - 1 else cs
        result *= float(np.clip(term, 0.0, 1.0)) ** weights[level]
        a, b = _downsample(a), _downsample(b)
    return float(result)


def count_residues(pw: PhaseGrid) -> int:
    """
    Count 2 x 2 plaquettes whose wrapped circulation is +-2*pi.

    Only plaquettes with all four corners inside the aperture are counted.

    Args:
        pw (PhaseGrid): Wrapped (or unwrapped) phase

    Returns:
        int: Number of residues
    """
    v = pw.values
    m = pw.mask
    loop = (wrap_values(v[:-1, 1:] - v[:-1, :-1])
            + wrap_values(v[1:, 1:] - v[:-1, 1:])
            + wrap_values(v[1:, :-1] - v[1:, 1:])
            + wrap_values(v[:-1, :-1] - v[1:, :-1]))
    inside = m[:-1, :-1] & m[:-1, 1:] & m[1:, :-1] & m[1:, 1:]
    return int(np.count_nonzero((np.abs(loop) > np.pi) & inside))


def rewrap_residual(rec: PhaseGrid, pw: PhaseGrid) -> float:
    """
    RMS over the aperture of w(rec - pw).

    The circular mean of the wrapped difference is removed first, so the
    residual ignores piston and is zero when rec is congruent to the data.
    """
    mask = _check_pair(rec, pw)
    diff = wrap_values(rec.values - pw.values)[mask]
    diff = wrap_values(diff - np.angle(np.mean(np.exp(1j * diff))))
    return float(np.sqrt(np.mean(diff ** 2)))


def evaluate(rec: PhaseGrid, truth: Optional[PhaseGrid] = None, wrapped: Optional[PhaseGrid] = None,
             runtime_ms: float = 0.0) -> MetricReport:
    """
    Score a reconstruction.

    With a ground truth all comparison metrics are filled in; without one only
    the rewrap residual against the wrapped data is available.

    Args:
        rec (PhaseGrid): Reconstruction
        truth (PhaseGrid, optional): Ground truth
        wrapped (PhaseGrid, optional): Wrapped input the reconstruction came from
        runtime_ms (float): Reconstruction time

    Returns:
        MetricReport: Scores
    """
    if truth is None and wrapped is None:
        raise GridValidationError("Need a ground truth or the wrapped data to evaluate against")
    report = MetricReport(runtime_ms=runtime_ms)
    if truth is not None:
        report.rel_error = relative_error(rec, truth)
        report.ssim = ssim(rec, truth)
        report.ms_ssim = ms_ssim(rec, truth)
    if wrapped is not None:
        report.residues = count_residues(wrapped)
        report.rewrap_residual = rewrap_residual(rec, wrapped)
    else:
        report.residues = count_residues(wrap_phase(truth))
    return report
