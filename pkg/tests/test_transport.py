"""Tests for characteristics and the free (inviscid) evolution."""

import math

import numpy as np
import pytest

from src.artifacts import tracer_rows
from src.flows import (
    AlternatingShear,
    CellularFlow,
    Profile,
    SeriesTerm,
    StationaryShear,
    StreamSeries,
    UniformFlow,
    drifted_frame,
)
from src.solver import cached_bounds
from src.spectral import SpectralField, evaluate_at, random_field, sobolev_norm_sq
from src.transport import backward_nodes, flow_map, free_evolve, period_reduce, trace


def _torus_gap(a: np.ndarray, b: np.ndarray) -> float:
    d = (np.asarray(a) - np.asarray(b) + 0.5) % 1.0 - 0.5
    return float(np.abs(d).max())


# ---------------------------------------------------------------------------
# Characteristics
# ---------------------------------------------------------------------------

class TestTrace:
    def test_uniform_translation_wraps(self):
        path = trace(UniformFlow(1.0, 1.0), [0.3, 0.9], 0.0, 0.25, 0.05)
        np.testing.assert_allclose(path.endpoint, [0.55, 0.15], atol=1e-12)
        assert np.all((path.points >= 0.0) & (path.points < 1.0))

    def test_times_cover_interval(self):
        path = trace(CellularFlow(), [0.1, 0.2], 0.0, 1.0, 0.1)
        assert path.times[0] == 0.0
        assert path.times[-1] == 1.0
        assert len(path.times) == 11
        assert path.flow_kind == "cellular"

    def test_steps_split_at_switch(self):
        path = trace(AlternatingShear(), [0.1, 0.2], 0.0, 1.0, 0.3)
        np.testing.assert_allclose(path.times, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_alternating_shear_closed_form(self):
        x1, x2 = 0.1, 0.2
        path = trace(AlternatingShear(), [x1, x2], 0.0, 1.0, 0.01)
        y1 = x1 + 0.5 * math.sin(2 * math.pi * x2)
        y2 = x2 + 0.5 * math.sin(2 * math.pi * y1)
        assert _torus_gap(path.endpoint, [y1, y2]) < 1e-12

    def test_cellular_streamline_is_preserved(self):
        path = trace(CellularFlow(), [0.1, 0.3], 0.0, 0.5, 1e-3)
        h = np.sin(2 * np.pi * path.points[:, 0]) * np.sin(2 * np.pi * path.points[:, 1])
        assert np.abs(h - h[0]).max() < 1e-7      # RK4 drift, O(dt^4)

    def test_backward_rejected(self):
        with pytest.raises(ValueError):
            trace(CellularFlow(), [0.1, 0.2], 1.0, 0.0, 0.1)

    def test_positive_dt_required(self):
        with pytest.raises(ValueError):
            trace(CellularFlow(), [0.1, 0.2], 0.0, 1.0, 0.0)

    def test_tracer_rows(self):
        path = trace(UniformFlow(1.0, 0.0), [0.0, 0.5], 0.0, 0.5, 0.25)
        rows = tracer_rows([path, path])
        assert rows[0] == (0, 0.0, 0.0, 0.5)
        assert rows[-1][:2] == (1, 0.5)
        assert rows[-1][2] == pytest.approx(0.5)
        assert len(rows) == 2 * len(path.times)


# ---------------------------------------------------------------------------
# Flow maps
# ---------------------------------------------------------------------------

class TestFlowMap:
    def test_forward_backward_round_trip(self):
        points = np.array([[0.1, 0.2], [0.7, 0.4], [0.33, 0.91]])
        forward = flow_map(CellularFlow(), points, 0.0, 0.4, 1e-3)
        back = flow_map(CellularFlow(), forward, 0.4, 0.0, 1e-3)
        np.testing.assert_allclose(back, points, atol=1e-10)

    def test_round_trip_across_switches(self):
        points = np.array([[0.15, 0.65]])
        forward = flow_map(AlternatingShear(), points, 0.3, 1.8, 0.01)
        back = flow_map(AlternatingShear(), forward, 1.8, 0.3, 0.01)
        np.testing.assert_allclose(back, points, atol=1e-12)

    @pytest.mark.parametrize("flow", [CellularFlow(), AlternatingShear()], ids=["cellular", "alternating"])
    def test_maps_compose_on_the_step_grid(self, flow):
        points = np.array([[0.1, 0.2], [0.7, 0.4], [0.33, 0.91]])
        direct = flow_map(flow, points, 0.0, 1.0, 0.01)
        split = flow_map(flow, flow_map(flow, points, 0.0, 0.4, 0.01), 0.4, 1.0, 0.01)
        assert _torus_gap(direct, split) < 1e-12

    def test_backward_nodes_of_translation(self):
        y1, y2 = backward_nodes(UniformFlow(0.5, 0.25), 0.0, 0.4, 0.1, 5)
        x = np.arange(5) / 5
        np.testing.assert_allclose(y1[:, 0], x - 0.2, atol=1e-13)
        np.testing.assert_allclose(y2[0, :], x - 0.1, atol=1e-13)

    def test_drifted_frame_matches_base_over_one_period(self):
        base = StreamSeries((SeriesTerm(0, 0, 1.0, 0.0), SeriesTerm.from_stream(1, 1, 0.05)))
        frame = drifted_frame(base)
        assert frame.period == pytest.approx(1.0)
        x0 = [0.2, 0.7]
        a = trace(frame, x0, 0.0, frame.period, 1e-3).endpoint
        b = trace(base, x0, 0.0, frame.period, 1e-3).endpoint
        assert _torus_gap(a, b) < 1e-8


# ---------------------------------------------------------------------------
# Free evolution
# ---------------------------------------------------------------------------

class TestFreeEvolve:
    def test_identity_when_times_match(self):
        f = random_field(4, 1)
        assert free_evolve(CellularFlow(), f, 0.3, 0.3, 0.1) is f

    def test_translation_is_exact(self):
        f = SpectralField.mode(4, 1, 2, "sin")
        g = free_evolve(UniformFlow(0.3, 0.7), f, 0.0, 0.5, 0.05)
        shift = 0.5 * np.array([0.3, 0.7])
        expected = f.coeff(1, 2) * np.exp(-2j * np.pi * (1 * shift[0] + 2 * shift[1]))
        assert g.coeff(1, 2) == pytest.approx(expected, abs=1e-12)
        assert g.norm() == pytest.approx(f.norm(), abs=1e-12)

    def test_pointwise_transport(self):
        flow = UniformFlow(0.3, 0.7)
        f = random_field(6, 11)
        g = free_evolve(flow, f, 0.0, 0.8, 0.05)
        rng = np.random.default_rng(4)
        x = rng.random((50, 2))
        moved = flow_map(flow, x, 0.0, 0.8, 0.05)
        np.testing.assert_allclose(
            evaluate_at(g, moved[:, 0], moved[:, 1]), evaluate_at(f, x[:, 0], x[:, 1]), atol=1e-6
        )

    def test_keeps_mean_zero_flag(self):
        g = free_evolve(CellularFlow(), random_field(4, 3), 0.0, 0.1, 0.01)
        assert g.mean_zero
        assert g.mean == 0.0

    def test_nearly_unitary_for_smooth_data(self):
        f = random_field(16, 3, band=2)
        g = free_evolve(CellularFlow(), f, 0.0, 0.01, 1e-3)
        assert g.norm() == pytest.approx(1.0, abs=1e-3)

    def test_h1_growth_stays_under_the_envelope(self):
        flow = CellularFlow()
        f = random_field(16, 5, band=2)
        g = free_evolve(flow, f, 0.0, 0.25, 1e-3)
        growth = math.sqrt(sobolev_norm_sq(g, 1) / sobolev_norm_sq(f, 1))
        assert growth <= cached_bounds(flow).envelope(0.25) * 1.01

    @pytest.mark.parametrize(
        ("make_flow", "tol"),
        [
            (lambda: UniformFlow(0.3, 0.7), 1e-3),
            (lambda: StationaryShear(Profile.sine()), 1e-3),
            (lambda: AlternatingShear(), 1e-3),
            (lambda: drifted_frame(StationaryShear(Profile(const=1.0, sin=(0.5,)))), 1e-3),
            (lambda: StreamSeries((SeriesTerm.from_stream(1, 1, 0.05),)), 1e-3),
            # separatrix corners shed mass past the truncation
            (lambda: CellularFlow(), 1e-2),
        ],
        ids=["uniform", "shear", "alternating", "drifted", "series", "cellular"],
    )
    def test_one_period_keeps_the_norm(self, make_flow, tol):
        flow = make_flow()
        f = random_field(32, 5, band=1)
        g = free_evolve(flow, f, 0.0, flow.period, 1e-3)
        assert g.norm() == pytest.approx(1.0, abs=tol)


class TestPeriodReduce:
    def test_shift_into_first_period(self):
        s, t = period_reduce(2.3, 3.1, 1.0)
        assert s == pytest.approx(0.3)
        assert t == pytest.approx(1.1)

    def test_negative_times(self):
        s, t = period_reduce(-0.25, 0.5, 1.0)
        assert s == pytest.approx(0.75)
        assert t == pytest.approx(1.5)

    def test_period_must_be_positive(self):
        with pytest.raises(ValueError):
            period_reduce(0.0, 1.0, 0.0)
