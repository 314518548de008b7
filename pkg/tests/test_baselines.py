"""Classical unwrappers: column-wise Itoh, reliability-guided and least squares."""

import numpy as np
import pytest

from backend.errors import GridValidationError
from backend.optics.grid import ApertureSpec, PhaseGrid, centered_coordinates
from backend.optics.propagation import wrap_phase
from backend.baselines.itoh import unwrap_columnwise
from backend.baselines.poisson import poisson_rhs, solve_poisson_dct, unwrap_pe
from backend.baselines.reliability import reliability_map, unwrap_mrp


def smooth_surface(n: int, amplitude: float = 12.0) -> np.ndarray:
    """Wrap-heavy phase whose per-pixel gradient stays well below pi."""
    x, y = centered_coordinates(n)
    u, v = x / n, y / n
    return amplitude * (u ** 2 + 0.5 * v ** 2 + 0.7 * u * v) + 9.0 * u - 5.0 * v


def assert_global_multiple(rec: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> None:
    offset = (rec - truth)[mask]
    turns = offset / (2 * np.pi)
    assert np.allclose(turns, np.round(turns[0]), atol=1e-9)


@pytest.fixture(params=["full", "disc"])
def mask(request):
    return ApertureSpec(request.param, 48).mask(64)


class TestColumnwise:
    def test_hand_evaluated_column(self):
        values = np.zeros((4, 4))
        values[:, 0] = [0.0, np.pi - 0.1, -np.pi + 0.1, -np.pi + 0.1]
        out = unwrap_columnwise(PhaseGrid(values)).values[:, 0]
        np.testing.assert_allclose(out, [0.0, np.pi - 0.1, np.pi + 0.1, np.pi + 0.1], atol=1e-12)

    def test_wrap_free_input_is_unchanged(self):
        values = 0.4 * np.sin(np.linspace(0, 3, 64))[:, None] * np.ones((1, 64))
        grid = PhaseGrid(values)
        np.testing.assert_allclose(unwrap_columnwise(grid).values, values, atol=1e-12)

    def test_congruent_input_up_to_global_multiple(self):
        truth = smooth_surface(64)
        truth -= truth[0, :][None, :] - truth[0, 0]  # same first-row turn count in every column
        full = np.ones((64, 64), dtype=bool)
        out = unwrap_columnwise(wrap_phase(PhaseGrid(truth))).values
        assert_global_multiple(out, truth, full)


class TestReliability:
    def test_map_is_positive_and_finite(self, screen):
        r = reliability_map(wrap_phase(screen).masked())
        assert np.all(np.isfinite(r)) and np.all(r > 0)

    def test_congruent_input(self, mask):
        truth = smooth_surface(64)
        out = unwrap_mrp(wrap_phase(PhaseGrid(truth, mask))).values
        assert_global_multiple(out, truth, mask)
        assert np.all(out[~mask] == 0.0)

    def test_ramp_with_one_wrap(self):
        rows, cols = np.mgrid[0:16, 0:16]
        truth = 0.45 * cols + 0.02 * rows
        assert np.count_nonzero(np.abs(np.diff(wrap_phase(PhaseGrid(truth)).values[0])) > np.pi) == 1
        out = unwrap_mrp(wrap_phase(PhaseGrid(truth))).values
        assert_global_multiple(out, truth, np.ones((16, 16), dtype=bool))

    def test_deterministic(self, screen):
        pw = wrap_phase(screen)
        assert np.array_equal(unwrap_mrp(pw).values, unwrap_mrp(pw).values)

    def test_output_is_congruent(self, screen):
        pw = wrap_phase(screen)
        out = unwrap_mrp(pw).values
        turns = (out - pw.values)[pw.mask] / (2 * np.pi)
        np.testing.assert_allclose(turns, np.round(turns), atol=1e-9)


class TestLeastSquares:
    def test_congruent_input_is_exact(self, mask):
        truth = smooth_surface(64)
        out = unwrap_pe(wrap_phase(PhaseGrid(truth, mask))).values
        expected = truth - truth[mask].mean()
        assert np.max(np.abs(out - expected)[mask]) <= 1e-8

    def test_constant_input(self, mask):
        out = unwrap_pe(PhaseGrid(np.full((64, 64), 1.7), mask)).values
        assert np.max(np.abs(out)) <= 1e-12

    def test_dct_solver_inverts_neumann_laplacian(self):
        rng = np.random.default_rng(9)
        phi = rng.normal(size=(16, 16))
        phi -= phi.mean()
        rho = (np.diff(np.diff(phi, axis=1), axis=1, prepend=0, append=0)
               + np.diff(np.diff(phi, axis=0), axis=0, prepend=0, append=0))
        np.testing.assert_allclose(solve_poisson_dct(rho), phi, atol=1e-10)

    def test_rhs_of_wrap_free_input_is_plain_laplacian(self):
        rng = np.random.default_rng(10)
        phi = 0.2 * rng.normal(size=(8, 8))
        direct = (np.diff(np.diff(phi, axis=1), axis=1, prepend=0, append=0)
                  + np.diff(np.diff(phi, axis=0), axis=0, prepend=0, append=0))
        np.testing.assert_allclose(poisson_rhs(phi), direct, atol=1e-12)

    def test_empty_mask(self):
        with pytest.raises(GridValidationError):
            unwrap_pe(PhaseGrid(np.zeros((8, 8)), np.zeros((8, 8), dtype=bool)))
