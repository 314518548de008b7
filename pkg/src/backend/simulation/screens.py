"""
DigiWFS Unwrap - Turbulence phase screens and noise

This module generates seed-deterministic von Karman / Kolmogorov phase screens
with the FFT method (optionally completed by low-frequency subharmonics) and
applies the relative uniform noise used in the comparison protocol.

Classes:
    ScreenSpec: Screen size, strength, seed and outer scale

Functions:
    kolmogorov_screen: Generate a phase screen
    apply_noise: Add relative uniform noise to a (wrapped) phase
    structure_function: Empirical phase structure function along axis 1
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from backend.errors import GridValidationError, UsageError
from backend.optics.grid import PhaseGrid

logger = logging.getLogger(__name__)

PSD_CONSTANT = 0.023
SUBHARMONIC_LEVELS = 3


@dataclass(frozen=True)
class ScreenSpec:
    """
    Phase screen parameters.

    Args:
        n (int): Grid size, even
        r0_px (float): Fried parameter in pixels; smaller is stronger
        seed (int): Random seed
        outer_scale_px (float, optional): Outer scale in pixels, defaults to n;
            ``inf`` gives a pure Kolmogorov spectrum
        subharmonics (bool): Add low-frequency subharmonic components
    """

    n: int = 128
    r0_px: float = 8.0
    seed: int = 0
    outer_scale_px: Optional[float] = None
    subharmonics: bool = False

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise UsageError(f"Screen size must be even and at least 4, got {self.n}", key="n")
        if not self.r0_px > 0:
            raise UsageError(f"r0 must be positive, got {self.r0_px}", key="r0")
        if self.outer_scale_px is not None and not self.outer_scale_px > 0:
            raise UsageError(f"Outer scale must be positive, got {self.outer_scale_px}", key="outer_scale")
        if self.seed < 0:
            raise UsageError(f"Seed must be non-negative, got {self.seed}", key="seed")

    @property
    def outer_scale(self) -> float:
        return float(self.n) if self.outer_scale_px is None else float(self.outer_scale_px)


def _phase_psd(spec: ScreenSpec, f_squared: np.ndarray) -> np.ndarray:
    inverse_l0 = 0.0 if np.isinf(spec.outer_scale) else 1.0 / spec.outer_scale ** 2
    with np.errstate(divide="ignore"):
        return PSD_CONSTANT * spec.r0_px ** (-5.0 / 3.0) * (f_squared + inverse_l0) ** (-11.0 / 6.0)


def _subharmonic_screen(spec: ScreenSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n
    axis = np.arange(n, dtype=float)
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    offsets = np.array([-1.0, 0.0, 1.0])
    screen = np.zeros((n, n), dtype=complex)
    for level in range(1, SUBHARMONIC_LEVELS + 1):
        df = 1.0 / (3 ** level * n)
        fy, fx = np.meshgrid(offsets * df, offsets * df, indexing="ij")
        psd = _phase_psd(spec, fx ** 2 + fy ** 2)
        psd[1, 1] = 0.0
        amplitude = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) * np.sqrt(psd) * df
        for a in range(3):
            for b in range(3):
                if a == 1 and b == 1:
                    continue
                screen += amplitude[a, b] * np.exp(2j * np.pi * (fx[a, b] * xx + fy[a, b] * yy))
    return screen.real


def kolmogorov_screen(spec: ScreenSpec, mask: Optional[np.ndarray] = None) -> PhaseGrid:
    """
    FFT phase screen with a von Karman spectrum.

    Complex white noise is shaped by the square root of
    0.023 r0^(-5/3) (f^2 + 1/L0^2)^(-11/6), f in cycles per pixel, and the real
    part of the inverse transform is kept. The result has zero grid mean.

    Args:
        spec (ScreenSpec): Screen parameters
        mask (np.ndarray, optional): Aperture attached to the returned grid

    Returns:
        PhaseGrid: Screen in radians
    """
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    freq = sfft.fftfreq(n)
    fy, fx = np.meshgrid(freq, freq, indexing="ij")
    psd = _phase_psd(spec, fx ** 2 + fy ** 2)
    psd[0, 0] = 0.0
    df = 1.0 / n
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    screen = sfft.ifft2(noise * np.sqrt(psd) * df).real * n * n
    if spec.subharmonics:
        screen = screen + _subharmonic_screen(spec, rng)
    screen = screen - screen.mean()
    logger.debug(f"Generated {n}x{n} screen (r0={spec.r0_px}, seed={spec.seed}) with rms {screen.std():.3f} rad")
    return PhaseGrid(screen, mask)


def apply_noise(pw: PhaseGrid, level: float, seed: int, reference: Optional[PhaseGrid] = None) -> PhaseGrid:
    """
    Add relative uniform noise inside the aperture.

    The level is relative to the dynamic range of the unwrapped phase: each
    in-aperture pixel receives u * level * ptp(reference), u uniform on
    [-1, 1], with the peak-to-peak range taken over the aperture. Without a
    reference the range of ``pw`` itself is used, about 2 pi for wrapped data.
    The result is not wrapped again.

    Args:
        pw (PhaseGrid): Phase, normally already wrapped
        level (float): Relative noise level, e.g. 0.2
        seed (int): Random seed
        reference (PhaseGrid, optional): Unwrapped phase that sets the range

    Returns:
        PhaseGrid: Noisy phase
    """
    if not (np.isfinite(level) and level >= 0):
        raise UsageError(f"Noise level must be non-negative, got {level}", key="noise")
    if level == 0:
        return pw.with_values(pw.values)
    pw.require_mask()
    source = pw if reference is None else reference
    if source.values.shape != pw.values.shape:
        raise GridValidationError(f"Noise reference shape {source.values.shape} does not match {pw.values.shape}")
    amplitude = level * float(np.ptp(source.values[pw.mask]))
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=pw.values.shape)
    return pw.with_values(pw.values + np.where(pw.mask, u * amplitude, 0.0))


def structure_function(values: np.ndarray, separations: Sequence[int]) -> np.ndarray:
    """
    Mean squared phase difference along axis 1.

    Args:
        values (np.ndarray): Phase screen
        separations (Sequence[int]): Pixel separations

    Returns:
        np.ndarray: D(r) for each separation
    """
    values = np.asarray(values, dtype=float)
    return np.array([np.mean((values[:, r:] - values[:, :-r]) ** 2) for r in separations])
