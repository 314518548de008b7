"""
Statistical runs over simulated screens.

Deselect with ``pytest -m "not slow"``. The comparison runs once per module
on the desk-scale protocol: N = 128, disc of 64 px, 20% noise, 10 seeds.
The wrap-insensitivity and structure-function suites run over 20 and 100
screens.
"""

import numpy as np
import pytest

from backend.optics.grid import ApertureSpec
from backend.optics.propagation import intensity, wrap_phase
from backend.pipeline.config import RunConfig
from backend.pipeline.runner import compare, simulated_cases
from backend.reconstruction.fourier_pipeline import unwrap_fourier
from backend.reconstruction.nonlinear import NopeOptions
from backend.sensors.fourier import SHAPE_KINDS, ModulationSpec, ShapeFunction, modulated_intensity, sensor_intensity
from backend.sensors.shack_hartmann import build_layout, subimage_fields, unwrap_sh
from backend.simulation.screens import ScreenSpec, kolmogorov_screen, structure_function
from conftest import aligned_error, tilt_grid

pytestmark = pytest.mark.slow

QUARTER_WAVE = np.pi / 2
PROTOCOL_METHODS = ["columnwise", "mrp", "pe", "p4_linear", "p4_nope",
                    "sh@n_sub=8", "sh@n_sub=16", "sh@n_sub=32",
                    "fourier:pyramid3", "fourier:roof", "fourier:cone", "fourier:iquad"]


@pytest.fixture(scope="module")
def mean_errors():
    config = RunConfig(n=128, r0=8.0, noise=0.2, c=QUARTER_WAVE)
    rows = compare(PROTOCOL_METHODS, simulated_cases(config, range(10)), config)
    assert all(row.status == "ok" for row in rows)
    return {row.method: row.stats("rel_error")[0] for row in rows}


@pytest.mark.parametrize("cycles", [2, 5, 10])
def test_shack_hartmann_recovers_wrapped_tilts(cycles):
    mask = ApertureSpec("disc", 64).mask(128)
    truth = tilt_grid(128, cycles, 0.3 * cycles, mask)
    report = unwrap_sh(wrap_phase(truth), n_sub=16)
    assert aligned_error(report.phase.values, truth.values, mask) <= 0.02


# tilt across the 64 px aperture: pi, 4 pi and 10 pi
@pytest.mark.parametrize("cycles", [1.0, 4.0, 10.0])
def test_pyramid_recovers_wrapped_tilts(cycles):
    mask = ApertureSpec("disc", 64).mask(128)
    truth = tilt_grid(128, 0.96 * cycles, 0.28 * cycles, mask)
    report = unwrap_fourier(wrap_phase(truth), ShapeFunction("pyramid4", QUARTER_WAVE),
                            opts=NopeOptions(start="linear", max_iters=200))
    assert aligned_error(report.phase.values, truth.values, mask) <= 0.02


def test_classical_methods_order(mean_errors):
    assert mean_errors["columnwise"] > mean_errors["mrp"] > mean_errors["pe"]
    assert mean_errors["mrp"] >= 1.1 * mean_errors["pe"]


def test_pyramid_methods_beat_least_squares(mean_errors):
    assert mean_errors["p4_nope"] < mean_errors["p4_linear"] < mean_errors["pe"]
    assert mean_errors["p4_nope"] <= 35.0


def test_shack_hartmann_subaperture_trade_off(mean_errors):
    assert mean_errors["sh@n_sub=8"] > mean_errors["sh@n_sub=16"]
    assert mean_errors["sh@n_sub=32"] > mean_errors["sh@n_sub=16"]


def test_fourier_kind_ranking(mean_errors):
    for better in ("fourier:pyramid3", "fourier:roof"):
        for worse in ("fourier:cone", "fourier:iquad"):
            assert mean_errors[better] < mean_errors[worse]


@pytest.mark.parametrize("seed", range(20))
def test_every_sensor_ignores_wrapping(seed):
    mask = ApertureSpec("disc", 64).mask(128)
    screen = kolmogorov_screen(ScreenSpec(n=128, r0_px=8.0, seed=seed), mask)
    wrapped = wrap_phase(screen)
    for kind in SHAPE_KINDS:
        sf = ShapeFunction(kind, QUARTER_WAVE)
        assert np.max(np.abs(sensor_intensity(screen, sf) - sensor_intensity(wrapped, sf))) <= 1e-12
    sf, mod = ShapeFunction("pyramid4", QUARTER_WAVE), ModulationSpec(3.0, 16)
    assert np.max(np.abs(modulated_intensity(screen, sf, mod) - modulated_intensity(wrapped, sf, mod))) <= 1e-12
    layout = build_layout(mask, 16)
    a = intensity(subimage_fields(screen, layout, oversample=8))
    b = intensity(subimage_fields(wrapped, layout, oversample=8))
    assert np.max(np.abs(a - b)) <= 1e-12


def test_structure_function_follows_five_thirds():
    separations = [3, 12]
    total = np.zeros(2)
    for seed in range(100):
        spec = ScreenSpec(n=256, r0_px=8.0, seed=seed, outer_scale_px=np.inf, subharmonics=True)
        total += structure_function(kolmogorov_screen(spec).values, separations)
    slope = np.log(total[1] / total[0]) / np.log(4.0)
    assert abs(slope - 5 / 3) <= 0.15
