"""
DigiWFS Unwrap - Digital propagation

This module implements the wrapping operator, centred unitary 2D discrete
Fourier transforms and the pupil-to-focal-plane propagation shared by all
digital sensors. One lens is one centred DFT; the focal plane is sampled on the
same N x N grid as the pupil.

Functions:
    wrap_values: Wrap an array into (-pi, pi]
    wrap_phase: Wrap a PhaseGrid
    dft2c / idft2c: Array-level centred unitary transforms
    dft2_centered / idft2_centered: ComplexField transforms
    phasor: Masked phasor of a phase grid
    pupil_field: Focal-plane field of the masked phasor
    intensity: Squared modulus of a field
    field_power: Mean squared modulus of a field
"""

import logging

import numpy as np
from scipy import fft as sfft

from backend.errors import GridValidationError
from backend.optics.grid import ComplexField, PhaseGrid

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# Two-part 2*pi for argument reduction of large phases
TWO_PI_HI = np.ldexp(np.floor(np.ldexp(TWO_PI, 30)), -30)
TWO_PI_LO = (TWO_PI - TWO_PI_HI) + 2.4492935982947064e-16


def wrap_values(values) -> np.ndarray:
    """
    Wrap values into (-pi, pi].

    Values already inside the interval are returned unchanged, so wrapping is
    idempotent bit for bit. +pi stays +pi and -pi maps to +pi.

    Args:
        values (array_like): Phase values in radians

    Returns:
        np.ndarray: Wrapped values as float64
    """
    x = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(x)):
        raise GridValidationError("Cannot wrap non-finite phase values")
    k = np.round(x / TWO_PI)
    r = (x - k * TWO_PI_HI) - k * TWO_PI_LO
    r = np.where(r > np.pi, r - TWO_PI, r)
    r = np.where(r <= -np.pi, r + TWO_PI, r)
    inside = (x > -np.pi) & (x <= np.pi)
    return np.where(inside, x, r)


def wrap_phase(p: PhaseGrid) -> PhaseGrid:
    """
    Wrap a phase grid pixel-wise into (-pi, pi]; the mask is kept.

    Args:
        p (PhaseGrid): Phase to wrap

    Returns:
        PhaseGrid: Wrapped phase
    """
    return p.with_values(wrap_values(p.values))


def dft2c(a: np.ndarray) -> np.ndarray:
    """Centred unitary forward DFT over the last two axes."""
    axes = (-2, -1)
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def idft2c(a: np.ndarray) -> np.ndarray:
    """Centred unitary inverse DFT over the last two axes."""
    axes = (-2, -1)
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(a, axes=axes), axes=axes, norm="ortho"), axes=axes)


def dft2_centered(f: ComplexField) -> ComplexField:
    return ComplexField(dft2c(f.data), f.pitch)


def idft2_centered(g: ComplexField) -> ComplexField:
    return ComplexField(idft2c(g.data), g.pitch)


def phasor(pw: PhaseGrid, sign: float = 1.0) -> np.ndarray:
    """
    Masked phasor chi * exp(sign * i * w(pw)).

    The phase is wrapped before exponentiation so that a phase and its wrapped
    version produce the identical array.

    Args:
        pw (PhaseGrid): Phase, wrapped or not
        sign (float): +1 for the lenslet pipeline, -1 for Fourier-type sensors

    Returns:
        np.ndarray: Complex N x N array
    """
    pw.require_mask()
    return np.where(pw.mask, np.exp(sign * 1j * wrap_values(pw.values)), 0.0)


def pupil_field(pw: PhaseGrid) -> ComplexField:
    """
    Focal-plane field of the masked aperture phasor.

    Args:
        pw (PhaseGrid): Phase, wrapped or not

    Returns:
        ComplexField: idft2c(chi * exp(i * pw)); mean power is #mask / N^2
    """
    return ComplexField(idft2c(phasor(pw)), pw.pitch)


def intensity(f) -> np.ndarray:
    """
    Pixel-wise squared modulus.

    Args:
        f (ComplexField or np.ndarray): Field

    Returns:
        np.ndarray: Non-negative intensities
    """
    data = f.data if isinstance(f, ComplexField) else np.asarray(f)
    return data.real ** 2 + data.imag ** 2


def field_power(f) -> float:
    """Mean squared modulus over the grid, i.e. total power normalized by N^2."""
    return float(np.mean(intensity(f)))
