"""Tests for the spectral representation layer."""

import math

import numpy as np
import pytest

from src.models import FOUR_PI_SQ, GridField, ResolutionError, TruncationMismatch
from src.spectral import (
    SpectralField,
    collocation_resolution,
    dealiased_resolution,
    evaluate_at,
    grid_coordinates,
    inner,
    low_mode_threshold,
    project_low,
    random_field,
    sobolev_norm_sq,
    splitmix64,
    to_grid,
    to_spectral,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _grid_l2_sq(g: GridField) -> float:
    return float(np.mean(g.values**2))


@pytest.fixture
def field8():
    return random_field(8, 42)


# ---------------------------------------------------------------------------
# Modes and constructors
# ---------------------------------------------------------------------------

class TestModes:
    def test_sine_mode_has_two_coefficients(self):
        f = SpectralField.mode(4, 1, 0, "sin")
        assert f.coeff(1, 0) == pytest.approx(-0.5j)
        assert f.coeff(-1, 0) == pytest.approx(0.5j)
        assert len(f.support()) == 2
        assert f.mean_zero

    def test_unit_sine_norm(self):
        f = SpectralField.mode(4, 1, 0, "sin").normalized()
        assert f.norm() == pytest.approx(1.0, abs=1e-15)
        assert abs(f.coeff(1, 0)) == pytest.approx(1 / math.sqrt(2))

    def test_mode_outside_truncation_rejected(self):
        with pytest.raises(ValueError):
            SpectralField.mode(2, 3, 0)

    def test_constant_mode_is_not_mean_zero(self):
        f = SpectralField.mode(2, 0, 0, "cos", amplitude=3.0)
        assert f.mean == pytest.approx(3.0)
        assert not f.mean_zero

    def test_non_hermitian_lattice_rejected(self):
        coeffs = np.zeros((5, 5), dtype=complex)
        coeffs[3, 2] = 1.0
        with pytest.raises(ValueError, match="Hermitian"):
            SpectralField(2, coeffs)

    def test_coefficients_are_read_only(self, field8):
        with pytest.raises(ValueError):
            field8.coeffs[0, 0] = 1.0

    def test_from_function_recovers_mode(self):
        f = SpectralField.from_function(lambda x1, x2: np.cos(2 * np.pi * (2 * x1 - x2)), 4)
        assert f.coeff(2, -1) == pytest.approx(0.5)
        assert f.coeff(-2, 1) == pytest.approx(0.5)
        assert f.variance_sq() == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

class TestTransforms:
    def test_round_trip_on_collocation_grid(self, field8):
        back = to_spectral(to_grid(field8, collocation_resolution(8)), 8)
        assert np.abs(back.coeffs - field8.coeffs).max() < 1e-12

    def test_round_trip_on_dealiased_grid(self, field8):
        back = to_spectral(to_grid(field8, dealiased_resolution(8)), 8)
        assert np.abs(back.coeffs - field8.coeffs).max() < 1e-12

    def test_parseval(self, field8):
        grid = to_grid(field8, 40)
        assert _grid_l2_sq(grid) == pytest.approx(field8.norm_sq(), rel=1e-10)

    def test_too_coarse_grid_raises(self, field8):
        with pytest.raises(ResolutionError):
            to_grid(field8, 16)

    def test_too_coarse_grid_is_a_value_error(self, field8):
        with pytest.raises(ValueError):
            to_spectral(GridField(np.zeros((10, 10))), 8)

    def test_grid_values_of_sine(self):
        f = SpectralField.mode(3, 1, 0, "sin")
        x1, _ = grid_coordinates(16)
        np.testing.assert_allclose(to_grid(f, 16).values, np.sin(2 * np.pi * x1), atol=1e-13)

    def test_dealiased_resolution_rule(self):
        assert dealiased_resolution(8) == 25
        assert collocation_resolution(8) == 17

    def test_point_evaluation_matches_closed_form(self):
        f = SpectralField.mode(4, 2, 1, "cos", amplitude=0.7)
        rng = np.random.default_rng(0)
        x1, x2 = rng.random(50), rng.random(50)
        expected = 0.7 * np.cos(2 * np.pi * (2 * x1 + x2))
        np.testing.assert_allclose(evaluate_at(f, x1, x2), expected, atol=1e-12)


# ---------------------------------------------------------------------------
# Norms and inner products
# ---------------------------------------------------------------------------

class TestNorms:
    def test_h1_of_unit_mode(self):
        f = SpectralField.mode(4, 1, 1, "sin").normalized()
        assert sobolev_norm_sq(f, 1) == pytest.approx(FOUR_PI_SQ * 2)

    def test_h1_of_constant_is_zero(self):
        f = SpectralField.mode(3, 0, 0, "cos", amplitude=2.0)
        assert sobolev_norm_sq(f, 1) == 0.0
        assert sobolev_norm_sq(f, 0) == pytest.approx(4.0)

    def test_poincare_on_mean_zero_fields(self, field8):
        assert sobolev_norm_sq(field8, 1) >= FOUR_PI_SQ * field8.norm_sq()

    def test_negative_index_needs_mean_zero(self):
        f = SpectralField.mode(3, 0, 0, "cos")
        with pytest.raises(ValueError):
            sobolev_norm_sq(f, -1)

    def test_inner_of_orthogonal_modes(self):
        a = SpectralField.mode(4, 1, 0, "sin")
        b = SpectralField.mode(4, 1, 0, "cos")
        assert abs(inner(a, b)) < 1e-15
        assert inner(a, a).real == pytest.approx(a.norm_sq())

    def test_truncation_mismatch(self):
        with pytest.raises(TruncationMismatch):
            inner(random_field(4, 1), random_field(5, 1))
        with pytest.raises(TruncationMismatch):
            random_field(4, 1) + random_field(5, 1)

    def test_arithmetic(self, field8):
        twice = field8 + field8
        assert twice.norm() == pytest.approx(2.0)
        assert (twice - 2 * field8).norm() < 1e-15


# ---------------------------------------------------------------------------
# Low-mode projection
# ---------------------------------------------------------------------------

class TestProjection:
    def test_four_lowest_modes_share_the_gap(self):
        assert low_mode_threshold(4, 4) == pytest.approx(FOUR_PI_SQ)
        assert low_mode_threshold(4, 5) == pytest.approx(2 * FOUR_PI_SQ)

    def test_project_low_keeps_ties_together(self):
        f = SpectralField.mode(4, 1, 0, "sin") + SpectralField.mode(4, 0, 1, "sin") + SpectralField.mode(4, 1, 1, "cos")
        low = project_low(f, 2)
        ks = {(w.k1, w.k2) for w in low.support()}
        assert ks == {(1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_rank_must_be_positive(self):
        with pytest.raises(ValueError):
            low_mode_threshold(4, 0)


# ---------------------------------------------------------------------------
# Seeded random data
# ---------------------------------------------------------------------------

class TestRandomField:
    def test_splitmix_reference_value(self):
        assert next(splitmix64(0)) == 0xE220A8397B1DCDAF

    def test_unit_norm_and_mean_zero(self, field8):
        assert field8.norm() == pytest.approx(1.0, abs=1e-14)
        assert field8.mean == 0.0

    def test_same_seed_same_bytes(self):
        a, b = random_field(6, 7), random_field(6, 7)
        assert a.coeffs.tobytes() == b.coeffs.tobytes()

    def test_different_seed_differs(self):
        assert np.abs(random_field(6, 7).coeffs - random_field(6, 8).coeffs).max() > 1e-3

    def test_band_limits_support(self):
        f = random_field(8, 3, band=2)
        assert max(max(abs(w.k1), abs(w.k2)) for w in f.support()) == 2

    def test_default_band_independent_of_truncation(self):
        a, b = random_field(4, 42), random_field(16, 42)
        assert a.coeff(1, 2) == pytest.approx(b.coeff(1, 2), abs=1e-15)

    def test_band_out_of_range(self):
        with pytest.raises(ValueError):
            random_field(4, 1, band=5)
