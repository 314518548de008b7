"""Fourier-type sensors, the linear pyramid reconstructor and the unwrapping pipeline."""

import numpy as np
import pytest

from backend.errors import GridValidationError, UsageError
from backend.optics.grid import ApertureSpec, PhaseGrid
from backend.optics.propagation import wrap_phase
from backend.reconstruction.fourier_pipeline import unwrap_fourier, unwrap_roof
from backend.reconstruction.nonlinear import NopeOptions
from backend.reconstruction.pyramid_linear import calibrate_p4, check_pupil_separation, linear_reconstruct_p4
from backend.reconstruction.tip_tilt import estimate_tilt, remove_tilt
from backend.sensors.fourier import (
    SHAPE_KINDS,
    ModulationSpec,
    ShapeFunction,
    eval_shape,
    frequency_grid,
    modulated_intensity,
    modulation_phases,
    sensor_intensity,
    transfer_function,
)
from conftest import aligned_error, tilt_grid

QUARTER_WAVE = np.pi / 2


@pytest.fixture
def pupil():
    return ApertureSpec("disc", 32).mask(64)


class TestShapeFunctions:
    def test_pyramid_apex(self):
        assert eval_shape(ShapeFunction("pyramid4", 1.0), np.array(0.0), np.array(0.0)) == 0.0

    def test_iquad_values(self):
        sf = ShapeFunction("iquad")
        assert eval_shape(sf, np.array(1.0), np.array(-1.0)) == pytest.approx(np.pi / 2)
        assert eval_shape(sf, np.array(1.0), np.array(1.0)) == 0.0

    def test_pyramid_is_sum_of_roofs(self):
        xi1, xi2 = frequency_grid(32)
        total = eval_shape(ShapeFunction("pyramid4", 0.7), xi1, xi2)
        parts = (eval_shape(ShapeFunction("roof_x", 0.7), xi1, xi2)
                 + eval_shape(ShapeFunction("roof_y", 0.7), xi1, xi2))
        np.testing.assert_allclose(total, parts, atol=1e-12)

    def test_three_sided_pyramid_is_continuous_minimum(self):
        rng = np.random.default_rng(4)
        xi1, xi2 = rng.uniform(-20, 20, size=(2, 500))
        expected = 1.3 * np.minimum(-2 * xi1, np.minimum(xi1 - np.sqrt(3) * xi2, xi1 + np.sqrt(3) * xi2))
        np.testing.assert_allclose(eval_shape(ShapeFunction("pyramid3", 1.3), xi1, xi2), expected, atol=1e-9)

    @pytest.mark.parametrize("angle, gradient", [(0.0, (-2.0, 0.0)),
                                                 (2 * np.pi / 3, (1.0, -np.sqrt(3))),
                                                 (-2 * np.pi / 3, (1.0, np.sqrt(3)))])
    def test_three_sided_pyramid_face_orientation(self, angle, gradient):
        # theta = 0 lies along +xi1; each sector centre sits on one flat face
        sf = ShapeFunction("pyramid3", 0.8)
        xi1, xi2, h = 10 * np.cos(angle), 10 * np.sin(angle), 1e-3

        def psi(a, b):
            return float(eval_shape(sf, np.array(a), np.array(b)))

        d1 = (psi(xi1 + h, xi2) - psi(xi1 - h, xi2)) / (2 * h)
        d2 = (psi(xi1, xi2 + h) - psi(xi1, xi2 - h)) / (2 * h)
        assert d1 == pytest.approx(0.8 * gradient[0], abs=1e-9)
        assert d2 == pytest.approx(0.8 * gradient[1], abs=1e-9)

    def test_cone_is_radial(self):
        assert eval_shape(ShapeFunction("cone", 2.0), np.array(3.0), np.array(4.0)) == pytest.approx(10.0)

    def test_invalid_parameters(self):
        with pytest.raises(UsageError):
            ShapeFunction("pyramid5")
        with pytest.raises(UsageError):
            ShapeFunction("cone", 0.0)
        with pytest.raises(UsageError):
            ModulationSpec(-1.0)
        with pytest.raises(UsageError):
            ModulationSpec(1.0, 0)

    def test_transfer_function_is_unimodular_and_read_only(self):
        otf = transfer_function(ShapeFunction("cone", 1.0), 16)
        np.testing.assert_allclose(np.abs(otf), 1.0)
        assert not otf.flags.writeable


class TestSensorIntensity:
    @pytest.mark.parametrize("kind", SHAPE_KINDS)
    def test_wrap_insensitivity(self, kind, screen):
        sf = ShapeFunction(kind, QUARTER_WAVE)
        a = sensor_intensity(screen, sf)
        b = sensor_intensity(wrap_phase(screen), sf)
        assert np.max(np.abs(a - b)) <= 1e-12

    @pytest.mark.parametrize("kind", SHAPE_KINDS)
    def test_power_is_conserved(self, kind, screen):
        frame = sensor_intensity(screen, ShapeFunction(kind, 1.0))
        assert np.mean(frame) == pytest.approx(screen.mask_count / screen.n ** 2, rel=1e-10)

    def test_flat_pyramid_splits_into_four_pupils(self, pupil):
        frame = sensor_intensity(PhaseGrid(np.zeros((64, 64)), pupil), ShapeFunction("pyramid4", QUARTER_WAVE))
        total = frame.sum()
        for rs in (slice(0, 32), slice(32, 64)):
            for cs in (slice(0, 32), slice(32, 64)):
                block = frame[rs, cs]
                assert block.sum() >= 0.2 * total
                weights = np.where(block > 0.1 * block.max(), block, 0.0)
                rows, cols = np.mgrid[0:32, 0:32]
                centre = ((rows * weights).sum() / weights.sum(), (cols * weights).sum() / weights.sum())
                assert abs(centre[0] - 16) <= 2 and abs(centre[1] - 16) <= 2

    def test_zero_radius_modulation_is_identity(self, screen):
        sf = ShapeFunction("pyramid4", QUARTER_WAVE)
        base = sensor_intensity(screen, sf)
        assert np.array_equal(modulated_intensity(screen, sf, ModulationSpec(0.0, 7)), base)
        assert np.array_equal(modulated_intensity(screen, sf, None), base)

    def test_single_step_modulation_is_one_tilt(self, screen):
        sf = ShapeFunction("pyramid4", QUARTER_WAVE)
        mod = ModulationSpec(2.0, 1)
        tilt = modulation_phases(screen.mask, mod)[0]
        expected = sensor_intensity(screen.with_values(screen.values + tilt), sf)
        np.testing.assert_allclose(modulated_intensity(screen, sf, mod), expected, atol=1e-14)

    def test_modulated_wrap_insensitivity(self, screen):
        sf = ShapeFunction("pyramid4", QUARTER_WAVE)
        mod = ModulationSpec(3.0, 8)
        a = modulated_intensity(screen, sf, mod)
        b = modulated_intensity(wrap_phase(screen), sf, mod)
        assert np.max(np.abs(a - b)) <= 1e-12


class TestLinearPyramid:
    def test_overlapping_pupils_are_rejected(self, pupil):
        with pytest.raises(GridValidationError):
            check_pupil_separation(pupil, 0.5)
        check_pupil_separation(pupil, QUARTER_WAVE)

    def test_flat_frame_gives_zero_phase(self, pupil):
        frame = sensor_intensity(PhaseGrid(np.zeros((64, 64)), pupil), ShapeFunction("pyramid4", QUARTER_WAVE))
        phase = linear_reconstruct_p4(frame, pupil, QUARTER_WAVE)
        assert np.max(np.abs(phase.values)) <= 1e-8

    def test_small_tilt(self, pupil):
        truth = tilt_grid(64, 0.15, 0.0, pupil)
        frame = sensor_intensity(truth, ShapeFunction("pyramid4", QUARTER_WAVE))
        phase = linear_reconstruct_p4(frame, pupil, QUARTER_WAVE)
        assert np.max(np.abs(truth.values[pupil])) <= 0.3
        assert aligned_error(phase.values, truth.values, pupil) <= 0.10

    def test_calibration_is_cached(self, pupil):
        assert calibrate_p4(pupil, QUARTER_WAVE) is calibrate_p4(pupil.copy(), QUARTER_WAVE)


class TestUnwrapFourier:
    def test_linear_mode_needs_pyramid(self, pupil):
        pw = PhaseGrid(np.zeros((64, 64)), pupil)
        with pytest.raises(UsageError):
            unwrap_fourier(pw, ShapeFunction("cone", 1.0), mode="linear")

    def test_linear_start_needs_pyramid(self, pupil):
        pw = PhaseGrid(np.zeros((64, 64)), pupil)
        with pytest.raises(UsageError):
            unwrap_fourier(pw, ShapeFunction("roof_x", 1.0), opts=NopeOptions(start="linear"))

    def test_cone_on_flat_phase(self, pupil):
        pw = PhaseGrid(np.zeros((64, 64)), pupil)
        report = unwrap_fourier(pw, ShapeFunction("cone", 1.0), opts=NopeOptions(start="zero"))
        assert np.max(np.abs(report.phase.values)) <= 1e-8
        assert report.method == "fourier:cone"
        assert "low_confidence" in report.flags

    def test_pyramid_methods_are_named(self, pupil):
        pw = PhaseGrid(np.zeros((64, 64)), pupil)
        sf = ShapeFunction("pyramid4", QUARTER_WAVE)
        assert unwrap_fourier(pw, sf, mode="linear").method == "p4_linear"
        nope = unwrap_fourier(pw, sf)
        assert nope.method == "p4_nope"
        assert nope.converged and "low_confidence" not in nope.flags

    def test_iteration_cap_flags_not_converged(self, pupil):
        pw = wrap_phase(tilt_grid(64, 1.0, 0.5, pupil))
        opts = NopeOptions(start="zero", max_iters=1, grad_tol=0.0)
        report = unwrap_fourier(pw, ShapeFunction("pyramid4", QUARTER_WAVE), opts=opts, tip_tilt=False)
        assert not report.converged
        assert "not_converged" in report.flags
        assert report.iterations <= 1

    def test_roof_averages_both_orientations(self, pupil):
        pw = PhaseGrid(np.zeros((64, 64)), pupil)
        report = unwrap_roof(pw, c=QUARTER_WAVE)
        assert report.method == "fourier:roof"
        assert np.max(np.abs(report.phase.values)) <= 1e-8
        with pytest.raises(UsageError):
            unwrap_roof(pw, opts=NopeOptions(start="linear"))


class TestTipTilt:
    def test_plane_slopes_are_exact(self, pupil):
        truth = tilt_grid(64, 3.0, -1.5, pupil)
        slope_x, slope_y = estimate_tilt(wrap_phase(truth))
        assert slope_x == pytest.approx(2 * np.pi * 3.0 / 64, abs=1e-12)
        assert slope_y == pytest.approx(2 * np.pi * -1.5 / 64, abs=1e-12)

    def test_removed_plane_leaves_a_flat_residual(self, pupil):
        truth = tilt_grid(64, 4.0, 2.5, pupil)
        residual, plane, _ = remove_tilt(wrap_phase(truth))
        assert np.max(np.abs(residual.values[pupil])) <= 1e-9
        np.testing.assert_allclose(plane[pupil] - plane[pupil].mean(), truth.values[pupil] - truth.values[pupil].mean(),
                                   atol=1e-9)

    @pytest.mark.parametrize("cycles", [2.0, 5.0])
    def test_pyramid_recovers_tilts_beyond_its_linear_range(self, cycles, pupil):
        truth = tilt_grid(64, 0.96 * cycles, 0.28 * cycles, pupil)
        sf = ShapeFunction("pyramid4", QUARTER_WAVE)
        for mode in ("linear", "nonlinear"):
            report = unwrap_fourier(wrap_phase(truth), sf, mode=mode)
            assert aligned_error(report.phase.values, truth.values, pupil) <= 0.02
            assert len(report.diagnostics["tip_tilt"]) == 2

    def test_can_be_switched_off(self, pupil):
        pw = wrap_phase(tilt_grid(64, 0.5, 0.0, pupil))
        report = unwrap_fourier(pw, ShapeFunction("pyramid4", QUARTER_WAVE), mode="linear", tip_tilt=False)
        assert "tip_tilt" not in report.diagnostics

    def test_empty_aperture(self):
        with pytest.raises(GridValidationError):
            estimate_tilt(PhaseGrid(np.zeros((8, 8)), np.zeros((8, 8), dtype=bool)))
