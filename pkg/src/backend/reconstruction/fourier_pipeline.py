"""
DigiWFS Unwrap - Fourier-type sensor unwrapping pipeline

Propagates the wrapped phase through a digital Fourier-type sensor and hands
the detector frame to the linear or nonlinear reconstructor.
"""

import logging
import time
from typing import Optional

import numpy as np

from backend.errors import UsageError
from backend.optics.grid import PhaseGrid
from backend.report import UnwrapReport
from backend.reconstruction.nonlinear import NopeOptions, solve_nonlinear
from backend.reconstruction.pyramid_linear import reconstruct_p4
from backend.reconstruction.tip_tilt import remove_tilt
from backend.sensors.fourier import LOW_CONFIDENCE_KINDS, ModulationSpec, ShapeFunction, modulated_intensity

logger = logging.getLogger(__name__)

MODES = ("linear", "nonlinear")


def unwrap_fourier(pw: PhaseGrid, sf: ShapeFunction, mode: str = "nonlinear",
                   opts: Optional[NopeOptions] = None,
                   modulation: Optional[ModulationSpec] = None, tip_tilt: bool = True) -> UnwrapReport:
    """
    Fourier-type sensor phase unwrapping.

    With ``tip_tilt`` the mean tilt of the wrapped phase is removed before
    sensing and restored afterwards; the sensor only sees the residual.

    Args:
        pw (PhaseGrid): Wrapped phase
        sf (ShapeFunction): Sensor element
        mode (str): ``linear`` (pyramid4 only) or ``nonlinear``
        opts (NopeOptions, optional): Nonlinear solver controls
        modulation (ModulationSpec, optional): Modulation
        tip_tilt (bool): Pre-compensate the mean tilt

    Returns:
        UnwrapReport: Piston-free phase and diagnostics
    """
    if mode not in MODES:
        raise UsageError(f"Unknown reconstruction mode '{mode}'", key="mode")
    if mode == "linear" and sf.kind != "pyramid4":
        raise UsageError(f"Linear reconstruction requires the pyramid4 sensor, got {sf.kind}", key="method")

    started = time.perf_counter()
    pw.require_mask()
    plane = None
    if tip_tilt:
        pw, plane, slopes = remove_tilt(pw)
    frame = modulated_intensity(pw, sf, modulation)

    if mode == "linear":
        phase, diagnostics = reconstruct_p4(frame, pw.mask, sf.c, modulation)
        report = UnwrapReport(phase=phase, method="p4_linear", diagnostics=diagnostics)
    else:
        opts = opts or NopeOptions()
        result = solve_nonlinear(frame, pw.mask, sf, opts, modulation)
        method = "p4_nope" if sf.kind == "pyramid4" else f"fourier:{sf.kind}"
        report = UnwrapReport(phase=result.phase, method=method, iterations=result.iterations,
                              converged=result.converged, objective=result.objective,
                              diagnostics=result.diagnostics)
        report.diagnostics["c"] = sf.c
        if not result.converged:
            report.flag("not_converged")

    if plane is not None:
        mask = pw.mask
        values = report.phase.values + plane
        report.phase = PhaseGrid(np.where(mask, values - values[mask].mean(), 0.0), mask)
        report.diagnostics["tip_tilt"] = list(slopes)
    if modulation is not None and modulation.active:
        report.diagnostics["mod_radius"] = modulation.radius
        report.diagnostics["mod_steps"] = modulation.steps
    if sf.kind in LOW_CONFIDENCE_KINDS:
        report.flag("low_confidence")
        logger.warning(f"The {sf.kind} sensor is known to reconstruct poorly; result flagged low_confidence")

    report.runtime_ms = (time.perf_counter() - started) * 1000.0
    logger.info(f"Fourier-type unwrap ({sf.kind}, {mode}) finished in {report.runtime_ms:.1f} ms")
    return report


def unwrap_roof(pw: PhaseGrid, c: float = np.pi / 2, opts: Optional[NopeOptions] = None,
                modulation: Optional[ModulationSpec] = None, tip_tilt: bool = True) -> UnwrapReport:
    """
    Average of the x-roof and y-roof nonlinear reconstructions.

    Linear starting is unavailable for roofs, so a zero start is used.
    """
    opts = opts or NopeOptions(start="zero")
    if opts.start != "zero":
        raise UsageError("Roof sensors only support the zero start", key="start")

    started = time.perf_counter()
    parts = [unwrap_fourier(pw, ShapeFunction(kind, c), "nonlinear", opts, modulation, tip_tilt)
             for kind in ("roof_x", "roof_y")]
    mask = pw.mask
    values = 0.5 * (parts[0].phase.values + parts[1].phase.values)
    values = np.where(mask, values - values[mask].mean(), 0.0)

    report = UnwrapReport(phase=PhaseGrid(values, mask), method="fourier:roof",
                          iterations=parts[0].iterations + parts[1].iterations,
                          converged=parts[0].converged and parts[1].converged,
                          diagnostics={"c": c, "s": opts.s, "start": opts.start,
                                       "iterations_x": parts[0].iterations,
                                       "iterations_y": parts[1].iterations})
    for part in parts:
        for name in part.flags:
            report.flag(name)
    report.runtime_ms = (time.perf_counter() - started) * 1000.0
    return report
