"""Digital Shack-Hartmann sensor: layout, subimages, slopes and integration."""

import numpy as np
import pytest

from backend.errors import UsageError
from backend.optics.grid import ApertureSpec, PhaseGrid, centered_coordinates
from backend.optics.propagation import intensity, wrap_phase
from backend.reconstruction.zonal import extend_nodes, upsample_nodes
from backend.sensors.shack_hartmann import (
    SlopeField,
    build_layout,
    centroid_slopes,
    integrate_slopes,
    subaperture_field,
    unwrap_sh,
)
from conftest import aligned_error, tilt_grid


class TestLayout:
    def test_disc_coverage(self):
        mask = ApertureSpec("disc", 64).mask(128)
        layout = build_layout(mask, 16)
        assert layout.sub_px == 8
        assert layout.active[8, 8] and not layout.active[0, 0]
        assert np.array_equal(layout.active, layout.active[::-1, ::-1])

    @pytest.mark.parametrize("n_sub", [1, 7, 12])
    def test_n_sub_must_divide_grid(self, n_sub):
        with pytest.raises(UsageError) as info:
            build_layout(np.ones((64, 64), dtype=bool), n_sub)
        assert info.value.key == "n_sub"

    def test_block_slices_out_of_range(self, full_mask):
        layout = build_layout(full_mask, 8)
        with pytest.raises(IndexError):
            layout.block_slices(8, 0)


class TestSubapertureField:
    def test_flat_phase_spot_is_centred(self, full_mask):
        layout = build_layout(full_mask, 8)
        spot = intensity(subaperture_field(PhaseGrid(np.zeros((64, 64))), 2, 5, layout))
        assert np.unravel_index(np.argmax(spot), spot.shape) == (4, 4)

    @pytest.mark.parametrize("s", [1, 2, -3])
    def test_integer_tilt_moves_the_spot_cyclically(self, s, full_mask):
        layout = build_layout(full_mask, 8)
        pw = tilt_grid(64, 8 * s)
        flat = subaperture_field(PhaseGrid(np.zeros((64, 64))), 3, 3, layout).data
        tilted = subaperture_field(pw, 3, 3, layout).data
        np.testing.assert_allclose(np.abs(tilted), np.abs(np.roll(flat, -s, axis=1)), atol=1e-12)

    def test_oversampled_size(self, full_mask):
        layout = build_layout(full_mask, 8)
        field = subaperture_field(PhaseGrid(np.zeros((64, 64))), 0, 0, layout, oversample=4)
        assert field.n == 32


class TestCentroidSlopes:
    def test_flat_and_piston_give_zero_slopes(self, full_mask):
        layout = build_layout(full_mask, 8)
        for value in (0.0, 1.3):
            slopes = centroid_slopes(PhaseGrid(np.full((64, 64), value)), layout)
            assert np.max(np.abs(slopes.sx)) <= 1e-10
            assert np.max(np.abs(slopes.sy)) <= 1e-10

    @pytest.mark.parametrize("weighting", ["modulus", "intensity"])
    def test_global_tilt(self, weighting, full_mask):
        layout = build_layout(full_mask, 8)
        pw = wrap_phase(tilt_grid(64, 8.0, -16.0))
        slopes = centroid_slopes(pw, layout, weighting=weighting)
        np.testing.assert_allclose(slopes.sx, 1.0, atol=1e-9)
        np.testing.assert_allclose(slopes.sy, -2.0, atol=1e-9)
        assert slopes.valid.all()

    def test_fractional_tilt_is_resolved_by_oversampling(self, full_mask):
        layout = build_layout(full_mask, 8)
        slopes = centroid_slopes(tilt_grid(64, 3.0), layout, oversample=8)
        np.testing.assert_allclose(slopes.sx, 3.0 / 8.0, atol=1e-9)

    def test_inactive_subapertures_are_zero_and_invalid(self):
        mask = ApertureSpec("disc", 32).mask(64)
        layout = build_layout(mask, 8)
        slopes = centroid_slopes(wrap_phase(tilt_grid(64, 5.0, 2.0, mask)), layout)
        assert not slopes.valid[0, 0]
        assert slopes.sx[0, 0] == 0.0 and slopes.sy[0, 0] == 0.0

    def test_unknown_weighting(self, full_mask):
        with pytest.raises(UsageError):
            centroid_slopes(PhaseGrid(np.zeros((64, 64))), build_layout(full_mask, 8), weighting="peak")


class TestIntegrateSlopes:
    def test_zero_slopes_give_zero_phase(self, full_mask):
        layout = build_layout(full_mask, 8)
        zeros = np.zeros((8, 8))
        phase = integrate_slopes(SlopeField(zeros, zeros, layout, layout.active))
        assert np.max(np.abs(phase.values)) <= 1e-12

    def test_tilt_slopes_give_the_plane(self, full_mask):
        layout = build_layout(full_mask, 8)
        sx = np.full((8, 8), 0.7)
        sy = np.full((8, 8), -0.4)
        phase = integrate_slopes(SlopeField(sx, sy, layout, layout.active))
        x, y = centered_coordinates(64)
        plane = 2 * np.pi * (0.7 * x - 0.4 * y) / 8
        plane -= plane.mean()
        assert np.max(np.abs(phase.values - plane)) <= 1e-6

    def test_defocus(self):
        mask = np.ones((128, 128), dtype=bool)
        x, y = centered_coordinates(128)
        truth = 1e-3 * (x ** 2 + y ** 2)
        report = unwrap_sh(PhaseGrid(truth, mask), n_sub=16)
        assert aligned_error(report.phase.values, truth, mask) <= 0.02


class TestNodeContinuation:
    def test_plane_is_continued_exactly(self):
        j, k = np.mgrid[0:10, 0:10]
        plane = 0.3 * j - 0.8 * k + 2.0
        active = np.zeros((10, 10), dtype=bool)
        active[3:7, 2:8] = True
        filled = extend_nodes(np.where(active, plane, 0.0), active)
        np.testing.assert_allclose(filled, plane, atol=1e-8)

    def test_upsampled_plane_is_exact(self):
        j, k = np.mgrid[0:6, 0:6]
        values = 1.5 * j + 0.5 * k
        pixels = upsample_nodes(values, np.ones((6, 6), dtype=bool), 4)
        rows, cols = np.mgrid[0:24, 0:24]
        expected = 1.5 * (rows - 1.5) / 4 + 0.5 * (cols - 1.5) / 4
        np.testing.assert_allclose(pixels, expected, atol=1e-12)


class TestUnwrapSH:
    def test_wrapped_tilt_across_disc(self):
        mask = ApertureSpec("disc", 64).mask(128)
        truth = tilt_grid(128, 6.0, 0.0, mask)  # 6 pi across the 64 px disc
        report = unwrap_sh(wrap_phase(truth), n_sub=16)
        assert aligned_error(report.phase.values, truth.values, mask) <= 0.01
        assert report.method == "sh"
        assert report.diagnostics["slope_residual_rms"] <= 1e-8

    def test_smooth_wrap_free_input(self):
        mask = np.ones((128, 128), dtype=bool)
        x, y = centered_coordinates(128)
        u, v = x / 64.0, y / 64.0
        truth = 1.2 * (u ** 2 - v ** 2) + 0.8 * u * v
        report = unwrap_sh(PhaseGrid(truth, mask), n_sub=16)
        assert aligned_error(report.phase.values, truth, mask) <= 0.05

    def test_output_is_piston_free_and_masked(self, screen):
        report = unwrap_sh(wrap_phase(screen), n_sub=16)
        phase = report.phase
        assert abs(phase.values[phase.mask].mean()) <= 1e-10
        assert np.all(phase.values[~phase.mask] == 0.0)
        assert report.diagnostics["slope_residuals"].shape == (16, 16)

    def test_disconnected_aperture_is_flagged(self):
        mask = np.zeros((64, 64), dtype=bool)
        mask[:16, :16] = True
        mask[48:, 48:] = True
        report = unwrap_sh(wrap_phase(tilt_grid(64, 4.0, 0.0, mask)), n_sub=8)
        assert "disconnected" in report.flags
        assert report.diagnostics["components"] == 2

    def test_wrap_invariance(self, screen):
        a = unwrap_sh(screen, n_sub=16).phase.values
        b = unwrap_sh(wrap_phase(screen), n_sub=16).phase.values
        assert np.array_equal(a, b)
