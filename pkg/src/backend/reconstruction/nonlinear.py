"""
DigiWFS Unwrap - Nonlinear intensity-matching reconstructor

Minimizes J(phi) = 1/2 ||F(phi) - I||^2, where F is the (optionally modulated)
Fourier-type sensor model, by gradient descent in a Sobolev-type metric. The
exact gradient comes from the adjoint of the forward chain:

    u = chi exp(-i phi),  E = A u,  r = |E|^2 - I,  w = A*(r E)
    grad J = 2 Im(u conj(w))

with A = idft exp(i psi) dft and A* = idft exp(-i psi) dft. The raw gradient
is smoothed by (1 + |xi|^2)^(-s) in frequency space before each step, and
step sizes come from an Armijo backtracking line search.

Classes:
    NopeOptions: Solver controls

Functions:
    objective_and_gradient: J and its exact gradient
    precondition: Sobolev smoothing of a gradient
    nonlinear_reconstruct: Frame to phase
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from backend.errors import GridValidationError, UsageError
from backend.optics.grid import PhaseGrid
from backend.optics.propagation import dft2c, idft2c
from backend.reconstruction.pyramid_linear import linear_reconstruct_p4
from backend.sensors.fourier import (
    ModulationSpec,
    ShapeFunction,
    frequency_grid,
    modulation_phases,
    transfer_function,
)

logger = logging.getLogger(__name__)

START_MODES = ("zero", "linear")


@dataclass(frozen=True)
class NopeOptions:
    """
    Controls of the nonlinear reconstructor.

    Args:
        s (float): Smoothness index of the preconditioner
        start (str): ``zero`` or ``linear`` (pyramid4 only)
        max_iters (int): Iteration cap
        grad_tol (float): Stop when the preconditioned gradient norm falls below this
        armijo (float): Sufficient-decrease constant
        initial_step (float): First trial step
        max_halvings (int): Backtracking limit per iteration
        max_step (float): Cap for the step growth between iterations
    """

    s: float = 11.0 / 6.0
    start: str = "linear"
    max_iters: int = 50
    grad_tol: float = 1e-6
    armijo: float = 1e-4
    initial_step: float = 1.0
    max_halvings: int = 30
    max_step: float = 64.0

    def __post_init__(self):
        if not self.s > 0:
            raise UsageError(f"Smoothness index s must be positive, got {self.s}", key="s")
        if self.start not in START_MODES:
            raise UsageError(f"Unknown start mode '{self.start}'", key="start")
        if self.max_iters < 1:
            raise UsageError(f"max_iters must be at least 1, got {self.max_iters}", key="max_iters")
        if not self.grad_tol >= 0:
            raise UsageError(f"Gradient tolerance must be non-negative, got {self.grad_tol}", key="tol")


@dataclass
class NonlinearResult:
    phase: PhaseGrid
    iterations: int
    converged: bool
    objective: List[float]
    diagnostics: Dict[str, Any]


def _tilts(mask: np.ndarray, modulation: Optional[ModulationSpec]) -> List[Optional[np.ndarray]]:
    if modulation is None or not modulation.active:
        return [None]
    return modulation_phases(mask, modulation)


def _forward(phi: np.ndarray, mask: np.ndarray, otf: np.ndarray, tilts) -> Tuple[np.ndarray, list]:
    frames = np.zeros(phi.shape)
    cache = []
    for tilt in tilts:
        total = phi if tilt is None else phi + tilt
        u = np.where(mask, np.exp(-1j * total), 0.0)
        field = idft2c(otf * dft2c(u))
        frames += field.real ** 2 + field.imag ** 2
        cache.append((u, field))
    return frames / len(tilts), cache


def objective_and_gradient(phi: np.ndarray, frame: np.ndarray, mask: np.ndarray, sf: ShapeFunction,
                           modulation: Optional[ModulationSpec] = None,
                           with_gradient: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    """
    Intensity misfit and its exact gradient.

    Args:
        phi (np.ndarray): Current phase estimate
        frame (np.ndarray): Measured intensity
        mask (np.ndarray): Aperture mask
        sf (ShapeFunction): Sensor element
        modulation (ModulationSpec, optional): Modulation of the measurement
        with_gradient (bool): Skip the adjoint pass when False

    Returns:
        Tuple[float, Optional[np.ndarray]]: (J, grad J); the gradient is zero outside the mask
    """
    otf = transfer_function(sf, phi.shape[0])
    tilts = _tilts(mask, modulation)
    model, cache = _forward(phi, mask, otf, tilts)
    residual = model - frame
    value = 0.5 * float(np.sum(residual ** 2))
    if not with_gradient:
        return value, None

    gradient = np.zeros(phi.shape)
    adjoint_otf = np.conj(otf)
    for u, field in cache:
        w = idft2c(adjoint_otf * dft2c(residual * field))
        gradient += 2.0 * np.imag(u * np.conj(w))
    return value, gradient / len(tilts)


def precondition(gradient: np.ndarray, mask: np.ndarray, s: float) -> np.ndarray:
    """
    Smooth a gradient with the weight (1 + |xi|^2)^(-s), xi in frequency pixels.

    Returns:
        np.ndarray: Real, masked search direction candidate
    """
    xi1, xi2 = frequency_grid(gradient.shape[0])
    weight = (1.0 + xi1 ** 2 + xi2 ** 2) ** (-s)
    smoothed = idft2c(weight * dft2c(np.where(mask, gradient, 0.0))).real
    return np.where(mask, smoothed, 0.0)


def _starting_point(frame: np.ndarray, mask: np.ndarray, sf: ShapeFunction, opts: NopeOptions,
                    modulation: Optional[ModulationSpec]) -> np.ndarray:
    if opts.start == "zero":
        return np.zeros(mask.shape)
    if sf.kind != "pyramid4":
        raise UsageError(f"Linear starting requires the pyramid4 sensor, got {sf.kind}", key="start")
    return np.array(linear_reconstruct_p4(frame, mask, sf.c, modulation).values)


def solve_nonlinear(frame: np.ndarray, mask: np.ndarray, sf: ShapeFunction, opts: NopeOptions,
                    modulation: Optional[ModulationSpec] = None) -> NonlinearResult:
    """nonlinear_reconstruct with the full iteration history."""
    frame = np.asarray(frame, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if frame.shape != mask.shape:
        raise GridValidationError(f"Frame shape {frame.shape} does not match mask shape {mask.shape}")
    if not mask.any():
        raise GridValidationError("Aperture mask is empty")
    if np.any(frame < 0) or not np.all(np.isfinite(frame)):
        raise GridValidationError("Intensity frame must be finite and non-negative")

    phi = _starting_point(frame, mask, sf, opts, modulation)
    value, gradient = objective_and_gradient(phi, frame, mask, sf, modulation)
    history = [value]
    step = opts.initial_step
    converged = False
    halvings_total = 0
    iterations = 0

    for iterations in range(opts.max_iters + 1):
        direction = -precondition(gradient, mask, opts.s)
        grad_norm = float(np.sqrt(np.sum(direction ** 2)))
        if grad_norm <= opts.grad_tol or value == 0.0:
            converged = True
            break
        if iterations == opts.max_iters:
            break

        slope = float(np.sum(gradient * direction))
        trial_step = step
        accepted = False
        for _ in range(opts.max_halvings + 1):
            candidate = phi + trial_step * direction
            trial_value, _ = objective_and_gradient(candidate, frame, mask, sf, modulation, with_gradient=False)
            if trial_value <= value + opts.armijo * trial_step * slope:
                accepted = True
                break
            trial_step *= 0.5
            halvings_total += 1
        if not accepted:
            logger.warning(f"Line search stalled at iteration {iterations} with J={value:.6g}")
            break

        phi = candidate
        value, gradient = objective_and_gradient(phi, frame, mask, sf, modulation)
        history.append(value)
        step = min(opts.max_step, 2.0 * trial_step)
        logger.debug(f"Iteration {iterations + 1}: J={value:.6g} step={trial_step:.3g}")

    if not converged:
        logger.warning(f"Nonlinear reconstruction stopped after {len(history) - 1} iterations without reaching "
                       f"the gradient tolerance {opts.grad_tol:g}")

    phi = np.where(mask, phi - phi[mask].mean(), 0.0)
    diagnostics = {
        "s": opts.s,
        "start": opts.start,
        "line_search_halvings": halvings_total,
        "final_gradient_norm": grad_norm,
    }
    return NonlinearResult(PhaseGrid(phi, mask), len(history) - 1, converged, history, diagnostics)


def nonlinear_reconstruct(frame: np.ndarray, mask: np.ndarray, sf: ShapeFunction,
                          opts: Optional[NopeOptions] = None,
                          modulation: Optional[ModulationSpec] = None) -> PhaseGrid:
    """
    Phase from a Fourier-type sensor frame by nonlinear intensity matching.

    Never raises on non-convergence; use solve_nonlinear to inspect the flag.

    Args:
        frame (np.ndarray): Measured intensity
        mask (np.ndarray): Aperture mask
        sf (ShapeFunction): Sensor element
        opts (NopeOptions, optional): Solver controls
        modulation (ModulationSpec, optional): Modulation of the measurement

    Returns:
        PhaseGrid: Piston-free phase
    """
    return solve_nonlinear(frame, mask, sf, opts or NopeOptions(), modulation).phase
