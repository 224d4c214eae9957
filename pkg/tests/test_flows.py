"""Tests for the flow library: velocities, bounds, Hamiltonians and config parsing."""

import math

import numpy as np
import pytest

from src.flows import (
    INFLATION,
    AlternatingShear,
    CellularFlow,
    DriftedFrame,
    Profile,
    SeriesTerm,
    StationaryShear,
    StreamSeries,
    UniformFlow,
    divergence_max,
    drifted_frame,
    flow_bounds,
    flow_from_dict,
    hamiltonian_eigenfunction,
    rational_period,
    spatial_mean,
    stream_function,
    velocity_at,
)
from src.models import FOUR_PI_SQ, TWO_PI, ConfigError, NotHamiltonian, NotIncompressible, ZeroMeanDrift
from src.spectral import grid_coordinates


ALL_FLOWS = [
    UniformFlow(1.0, 0.5),
    StationaryShear(),
    StationaryShear(Profile(const=0.5, sin=(1.0, 0.25), cos=(0.3,))),
    CellularFlow(0.7),
    AlternatingShear(),
    DriftedFrame(StationaryShear(Profile(const=1.0, sin=(0.5,))), (1.0, 0.0)),
    StreamSeries((SeriesTerm.from_stream(1, 2, 0.3, harmonic=1),)),
]


# ---------------------------------------------------------------------------
# Velocities
# ---------------------------------------------------------------------------

class TestVelocity:
    def test_uniform(self):
        u = velocity_at(UniformFlow(1.0, 1.0), np.array([[0.3, 0.9], [0.0, 0.0]]), 0.7)
        np.testing.assert_allclose(u, [[1.0, 1.0], [1.0, 1.0]])

    def test_cellular_stagnation_point(self):
        u = velocity_at(CellularFlow(), np.array([0.25, 0.25]), 0.0)
        np.testing.assert_allclose(u, [0.0, 0.0], atol=1e-14)

    def test_cellular_closed_form(self):
        x = np.array([0.1, 0.3])
        u = velocity_at(CellularFlow(2.0), x, 0.0)
        s1, c1 = math.sin(TWO_PI * 0.1), math.cos(TWO_PI * 0.1)
        s2, c2 = math.sin(TWO_PI * 0.3), math.cos(TWO_PI * 0.3)
        np.testing.assert_allclose(u, [-2 * TWO_PI * s1 * c2, 2 * TWO_PI * c1 * s2])

    def test_shear_depends_on_x1_only(self):
        u = velocity_at(StationaryShear(Profile.sine()), np.array([[0.25, 0.1], [0.25, 0.8]]), 0.0)
        np.testing.assert_allclose(u, [[0.0, 1.0], [0.0, 1.0]], atol=1e-14)

    def test_points_are_wrapped(self):
        flow = CellularFlow()
        a = velocity_at(flow, np.array([0.1, 0.2]), 0.0)
        b = velocity_at(flow, np.array([1.1, -0.8]), 0.0)
        np.testing.assert_allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("flow", ALL_FLOWS, ids=lambda f: f.kind)
    def test_incompressible(self, flow):
        for t in (0.0, 0.3 * flow.period, 0.7 * flow.period):
            assert divergence_max(flow, t) < 1e-8


# ---------------------------------------------------------------------------
# Alternating shear
# ---------------------------------------------------------------------------

class TestAlternatingShear:
    def test_switch_times(self):
        flow = AlternatingShear(duty=0.25, period=2.0)
        assert flow.switch_times() == (0.0, 0.5)

    def test_first_piece_is_horizontal(self):
        u = velocity_at(AlternatingShear(), np.array([0.0, 0.25]), 0.1)
        np.testing.assert_allclose(u, [1.0, 0.0], atol=1e-14)

    def test_second_piece_is_vertical(self):
        u = velocity_at(AlternatingShear(), np.array([0.25, 0.0]), 0.6)
        np.testing.assert_allclose(u, [0.0, 1.0], atol=1e-14)

    def test_within_selects_piece(self):
        flow = AlternatingShear()
        x1, x2 = np.array([0.25]), np.array([0.25])
        at_switch = flow.velocity(x1, x2, 0.5, within=0.4)
        np.testing.assert_allclose(at_switch, ([1.0], [0.0]), atol=1e-14)

    def test_breakpoints_forward_and_backward(self):
        flow = AlternatingShear()
        assert flow.breakpoints(0.2, 1.7) == pytest.approx([0.5, 1.0, 1.5])
        assert flow.breakpoints(1.7, 0.2) == pytest.approx([1.5, 1.0, 0.5])
        assert flow.breakpoints(0.5, 1.0) == []

    def test_duty_validated(self):
        with pytest.raises(ValueError):
            AlternatingShear(duty=1.0)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

class TestBounds:
    def test_uniform_has_no_gradient(self):
        bounds = flow_bounds(UniformFlow(3.0, 4.0))
        assert bounds.sup_u == pytest.approx(5.0 * INFLATION)
        assert bounds.sup_grad_u == pytest.approx(0.0, abs=1e-9)
        assert bounds.b1 == pytest.approx(1.0, abs=1e-8)

    def test_cellular(self):
        bounds = flow_bounds(CellularFlow())
        assert bounds.sup_u == pytest.approx(TWO_PI * INFLATION, rel=1e-6)
        assert bounds.sup_grad_u == pytest.approx(FOUR_PI_SQ * INFLATION, rel=1e-6)

    def test_envelope(self):
        bounds = flow_bounds(CellularFlow())
        assert bounds.envelope(0.0) == 1.0
        assert bounds.envelope(-0.5) == pytest.approx(bounds.envelope(0.5))
        rate = 2 * bounds.sup_grad_u
        assert bounds.envelope_sq_integral(0.01) == pytest.approx(math.expm1(rate * 0.01) / rate)

    def test_alternating_samples_both_pieces(self):
        bounds = flow_bounds(AlternatingShear())
        assert bounds.sup_u == pytest.approx(INFLATION, rel=1e-6)
        assert bounds.sup_grad_u == pytest.approx(TWO_PI * INFLATION, rel=1e-6)


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

class TestHamiltonian:
    @pytest.mark.parametrize("resolution", [32, 33, 64])
    def test_cellular_stream_function(self, resolution):
        ham = stream_function(CellularFlow(), resolution=resolution)
        x1, x2 = grid_coordinates(resolution)
        assert np.all(np.isfinite(ham.grid.values))
        assert ham.alpha == 0.0
        np.testing.assert_allclose(ham.grid.values, np.sin(TWO_PI * x1) * np.sin(TWO_PI * x2), atol=1e-10)

    def test_shear_with_mean_is_circle_valued(self):
        ham = stream_function(StationaryShear(Profile(const=2.0, sin=(0.5,))))
        assert ham.alpha == pytest.approx(2.0)
        assert ham.grid.values.min() >= 0.0
        assert ham.grid.values.max() <= 2.0

    def test_rational_period(self):
        assert rational_period(0.0, 0.0) == 0.0
        assert rational_period(1.0, 0.5) == pytest.approx(0.5)
        assert rational_period(0.0, 3.0) == pytest.approx(3.0)
        assert rational_period(0.75, 0.5) == pytest.approx(0.25)
        assert rational_period(1.0, 1.0 / 7.0) == pytest.approx(1.0 / 7.0)

    def test_irrational_mean_is_not_hamiltonian(self):
        with pytest.raises(NotHamiltonian):
            rational_period(1.0, math.sqrt(2.0))
        with pytest.raises(NotHamiltonian):
            stream_function(UniformFlow(1.0, math.sqrt(2.0)))

    def test_hamiltonian_eigenfunction_is_unit_and_mean_zero(self):
        psi = hamiltonian_eigenfunction(CellularFlow(), 8)
        assert psi.norm() == pytest.approx(1.0)
        assert psi.mean == 0.0
        assert abs(psi.coeff(1, 1)) == pytest.approx(0.5, abs=1e-10)

    def test_spatial_mean_needs_resolution(self):
        with pytest.raises(ValueError):
            spatial_mean(CellularFlow(), 0.0, resolution=8)


# ---------------------------------------------------------------------------
# Drifted frames and stream series
# ---------------------------------------------------------------------------

class TestConstructors:
    def test_drifted_frame_period(self):
        base = StationaryShear(Profile(const=0.0, sin=(1.0,)))
        frame = drifted_frame(UniformFlow(0.5, 0.0))
        assert frame.period == pytest.approx(2.0)
        assert frame.shift[0] == pytest.approx(0.5)
        with pytest.raises(ZeroMeanDrift):
            drifted_frame(base)

    def test_drifted_velocity(self):
        frame = DriftedFrame(UniformFlow(1.0, 0.0), (1.0, 0.0))
        u = velocity_at(frame, np.array([0.3, 0.4]), 0.2)
        np.testing.assert_allclose(u, [0.0, 0.0], atol=1e-14)

    def test_drifted_frame_needs_stationary_base(self):
        with pytest.raises(ValueError):
            DriftedFrame(AlternatingShear(), (1.0, 0.0))

    def test_stream_term_is_divergence_free(self):
        term = SeriesTerm.from_stream(2, -1, 0.5)
        assert term.a1 * term.k1 + term.a2 * term.k2 == pytest.approx(0.0)

    def test_compressible_series_rejected(self):
        term = SeriesTerm(1, 0, 1.0, 0.0)
        with pytest.raises(NotIncompressible):
            StreamSeries((term,))
        assert StreamSeries((term,), allow_compressible=True).is_stationary


# ---------------------------------------------------------------------------
# Config dictionaries
# ---------------------------------------------------------------------------

class TestFlowFromDict:
    @pytest.mark.parametrize("flow", ALL_FLOWS, ids=lambda f: f.kind)
    def test_to_dict_rebuilds_equal_flow(self, flow):
        rebuilt = flow_from_dict(flow.to_dict())
        x1, x2 = grid_coordinates(8)
        for t in (0.1, 0.6):
            a = flow.velocity(x1, x2, t)
            b = rebuilt.velocity(x1, x2, t)
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_profile_shorthand(self):
        flow = flow_from_dict({"kind": "stationary_shear", "params": {"profile": 3}})
        assert flow.profile == Profile.constant(3.0)

    def test_period_is_honoured(self):
        flow = flow_from_dict({"kind": "alternating_shear", "period": 0.5})
        assert flow.period == 0.5
        assert flow.switch_times() == (0.0, 0.25)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            flow_from_dict({"kind": "vortex"})

    def test_unknown_params(self):
        with pytest.raises(ConfigError):
            flow_from_dict({"kind": "cellular", "params": {"amp": 1.0}})

    def test_bad_profile_keys(self):
        with pytest.raises(ConfigError):
            flow_from_dict({"kind": "stationary_shear", "params": {"profile": {"tan": [1]}}})

    def test_compressible_series_is_a_config_error(self):
        data = {"kind": "stream_series", "params": {"terms": [{"k": [1, 0], "velocity": [1.0, 0.0]}]}}
        with pytest.raises(ConfigError):
            flow_from_dict(data)

    def test_stream_term_from_config(self):
        data = {"kind": "stream_series", "params": {"terms": [{"k": [1, 1], "stream": 0.2}]}}
        flow = flow_from_dict(data)
        assert flow.terms[0].a1 == pytest.approx(TWO_PI * 0.2)
        assert flow.terms[0].a2 == pytest.approx(-TWO_PI * 0.2)
