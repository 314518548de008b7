"""
DigiWFS Unwrap - Method runner

This module turns a RunConfig into an unwrapping run, simulates comparison
cases and runs method comparisons over many cases in parallel.

Classes:
    Case: One ground truth with its (noisy) wrapped input
    CompareRow: Aggregated scores of one method

Functions:
    run_method: Dispatch a method on a wrapped phase
    simulate_case: Truth, wrapped and noisy wrapped phase for a seed
    compare: Run a method list over cases and aggregate the scores
    format_table: Tab-delimited comparison table
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from slugify import slugify

from backend.baselines import unwrap_columnwise, unwrap_mrp, unwrap_pe
from backend.errors import DWFSError, UsageError
from backend.metrics.evaluation import MetricReport, evaluate
from backend.optics.grid import ApertureSpec, PhaseGrid
from backend.optics.grid_io import save_grid
from backend.optics.propagation import wrap_phase
from backend.pipeline.config import EXTERNAL_METHODS, RunConfig, check_method, parse_method
from backend.pipeline.progress_tracker import CompareProgressTracker
from backend.reconstruction.fourier_pipeline import unwrap_fourier, unwrap_roof
from backend.reconstruction.nonlinear import NopeOptions
from backend.report import UnwrapReport
from backend.sensors.fourier import ModulationSpec, ShapeFunction
from backend.sensors.shack_hartmann import unwrap_sh
from backend.simulation.screens import ScreenSpec, apply_noise, kolmogorov_screen

logger = logging.getLogger(__name__)

NOISE_SEED_OFFSET = 1_000_000
BASELINES = {"columnwise": unwrap_columnwise, "mrp": unwrap_mrp, "pe": unwrap_pe}


@dataclass(frozen=True, eq=False)
class Case:
    label: str
    truth: PhaseGrid
    wrapped: PhaseGrid


@dataclass
class CompareRow:
    method: str
    status: str = "ok"
    cells: int = 0
    metrics: List[MetricReport] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    def stats(self, key: str) -> Tuple[float, float]:
        values = [getattr(m, key) for m in self.metrics if getattr(m, key) is not None]
        if not values:
            return float("nan"), float("nan")
        return float(np.mean(values)), float(np.std(values))


def thread_cap() -> int:
    """Worker count from DWFS_THREADS, defaulting to the CPU count."""
    raw = os.getenv("DWFS_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer DWFS_THREADS={raw!r}")
    return os.cpu_count() or 1


def _nope_options(config: RunConfig, kind: str) -> NopeOptions:
    start = config.start or ("linear" if kind == "pyramid4" else "zero")
    return NopeOptions(s=config.s, start=start, max_iters=config.max_iters, grad_tol=config.tol)


def run_method(pw: PhaseGrid, config: RunConfig) -> UnwrapReport:
    """
    Run the configured method on a wrapped phase.

    Args:
        pw (PhaseGrid): Wrapped (possibly noisy) phase
        config (RunConfig): Method and parameters

    Returns:
        UnwrapReport: Reconstruction and diagnostics
    """
    method = config.method
    modulation = ModulationSpec(config.mod_radius, config.mod_steps)
    logger.info(f"Running method {method} on a {pw.n}x{pw.n} grid")

    if method == "sh":
        return unwrap_sh(pw, config.n_sub, oversample=config.oversample, weighting=config.weighting)
    if method == "p4_linear":
        return unwrap_fourier(pw, ShapeFunction("pyramid4", config.c), "linear", modulation=modulation,
                              tip_tilt=config.tip_tilt)
    if method == "p4_nope":
        return unwrap_fourier(pw, ShapeFunction("pyramid4", config.c), "nonlinear",
                              _nope_options(config, "pyramid4"), modulation, config.tip_tilt)
    if method.startswith("fourier:"):
        kind = method.split(":", 1)[1]
        if kind == "roof":
            return unwrap_roof(pw, config.c, _nope_options(config, "roof"), modulation, config.tip_tilt)
        return unwrap_fourier(pw, ShapeFunction(kind, config.c), "nonlinear", _nope_options(config, kind), modulation,
                              config.tip_tilt)
    if method in BASELINES:
        started = time.perf_counter()
        phase = BASELINES[method](pw)
        report = UnwrapReport(phase=phase, method=method)
        report.runtime_ms = (time.perf_counter() - started) * 1000.0
        logger.info(f"Baseline {method} finished in {report.runtime_ms:.1f} ms")
        return report
    raise UsageError(f"Unknown method '{method}'", key="method")


def case_mask(config: RunConfig) -> np.ndarray:
    return ApertureSpec(config.aperture, config.aperture_diameter).mask(config.n)


def simulate_case(config: RunConfig, seed: int) -> Tuple[PhaseGrid, PhaseGrid, PhaseGrid]:
    """
    Ground truth, wrapped and noisy wrapped phase for one seed.

    Args:
        config (RunConfig): Screen, aperture and noise parameters
        seed (int): Screen seed; the noise uses seed + NOISE_SEED_OFFSET

    Returns:
        Tuple[PhaseGrid, PhaseGrid, PhaseGrid]: (truth, wrapped, noisy)
    """
    mask = case_mask(config)
    screen = kolmogorov_screen(ScreenSpec(config.n, config.r0, seed, subharmonics=config.subharmonics), mask)
    truth = screen.with_values(screen.masked())
    wrapped = wrap_phase(truth)
    noisy = apply_noise(wrapped, config.noise, seed + NOISE_SEED_OFFSET, reference=truth)
    return truth, wrapped, noisy


def simulated_cases(config: RunConfig, seeds: Sequence[int]) -> List[Case]:
    cases = []
    for seed in seeds:
        truth, _, noisy = simulate_case(config, seed)
        cases.append(Case(f"seed{seed}", truth, noisy))
    return cases


def _resolve_methods(methods: Sequence[str], config: RunConfig) -> List[Tuple[str, Optional[RunConfig]]]:
    if not methods:
        raise UsageError("No methods given to compare", key="method")
    resolved = []
    for text in methods:
        name, overrides = parse_method(text)
        check_method(name, allow_external=True)
        if name in EXTERNAL_METHODS:
            resolved.append((text, None))
        else:
            resolved.append((text, config.with_overrides({**overrides, "method": name})))
    return resolved


def _run_cell(label: str, cfg: RunConfig, case: Case, output_dir: Optional[str]) -> MetricReport:
    report = run_method(case.wrapped, cfg)
    metrics = evaluate(report.phase, case.truth, case.wrapped, runtime_ms=report.runtime_ms)
    if output_dir:
        save_grid(report.phase, os.path.join(output_dir, slugify(f"{label}-{case.label}") + ".pgrid"))
    return metrics


def compare(methods: Sequence[str], cases: Sequence[Case], config: RunConfig,
            output_dir: Optional[str] = None, threads: Optional[int] = None,
            tracker: Optional[CompareProgressTracker] = None) -> List[CompareRow]:
    """
    Score every method on every case.

    Cells run in a thread pool. A cell that fails validation is recorded on
    its row and does not stop the comparison; poor scores are data, not
    failures. External methods get an ``external`` row without scores.

    Args:
        methods (Sequence[str]): Method strings, optionally with ``@key=value`` overrides
        cases (Sequence[Case]): Cases to score on
        config (RunConfig): Base parameters
        output_dir (str, optional): Where to write per-cell reconstructions
        threads (int, optional): Worker count, defaults to DWFS_THREADS
        tracker (CompareProgressTracker, optional): Progress sink

    Returns:
        List[CompareRow]: One row per method, in input order
    """
    resolved = _resolve_methods(methods, config)
    if not cases:
        raise UsageError("No cases to compare on", key="seeds")
    rows = {label: CompareRow(method=label) for label, _ in resolved}
    cells = [(label, cfg, case) for label, cfg in resolved if cfg is not None for case in cases]
    for label, cfg in resolved:
        if cfg is None:
            rows[label].status = "external"

    job_id = slugify("compare-" + "-".join(label for label, _ in resolved))[:80]
    if tracker is not None:
        tracker.create_job(job_id, len(cells), [label for label, _ in resolved])

    workers = threads or thread_cap()
    logger.info(f"Comparing {len(resolved)} methods on {len(cases)} cases with {workers} workers")
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(label, case, pool.submit(_run_cell, label, cfg, case, output_dir))
                       for label, cfg, case in cells]
            for label, case, future in futures:
                row = rows[label]
                row.cells += 1
                try:
                    row.metrics.append(future.result())
                    failed = False
                except DWFSError as e:
                    logger.error(f"Cell {label} / {case.label} failed: {str(e)}")
                    row.errors.append(str(e))
                    failed = True
                if tracker is not None:
                    tracker.update_cell(job_id, label, case.label, failed=failed)
    except Exception as e:
        if tracker is not None:
            tracker.fail_job(job_id, str(e))
        raise

    for row in rows.values():
        if row.errors:
            row.status = "partial" if row.metrics else "failed"
    if tracker is not None:
        tracker.complete_job(job_id)
    return [rows[label] for label, _ in resolved]


TABLE_COLUMNS = ("method", "status", "cells", "rel_error_mean", "rel_error_std", "ssim_mean", "ssim_std",
                 "ms_ssim_mean", "ms_ssim_std", "runtime_ms_mean")


def format_table(rows: Sequence[CompareRow], delimiter: str = "\t") -> str:
    """
    Render comparison rows as a delimited table with a header line.

    Returns:
        str: Table text ending with a newline
    """
    lines = [delimiter.join(TABLE_COLUMNS)]
    for row in rows:
        cells = [row.method, row.status, str(row.cells)]
        for key in ("rel_error", "ssim", "ms_ssim"):
            mean, std = row.stats(key)
            cells.extend([f"{mean:.4f}", f"{std:.4f}"])
        runtime = row.stats("runtime_ms")[0]
        cells.append(f"{runtime:.1f}")
        lines.append(delimiter.join(cells))
    return "\n".join(lines) + "\n"
