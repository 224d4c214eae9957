"""Tests for experiment configuration parsing and hashing."""

import json

import pytest

from src.config import build_initial, config_hash, load_config, parse_config
from src.flows import CellularFlow, UniformFlow
from src.models import ConfigError


def _simulate(**overrides) -> dict:
    data = {"kind": "simulate", "flow": {"kind": "cellular"}, "n_trunc": 8, "amplitude": 4.0, "t_end": 0.01}
    data.update(overrides)
    return data


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

class TestParseConfig:
    def test_minimal_simulate(self):
        cfg = parse_config(_simulate())
        assert cfg.kind == "simulate"
        assert cfg.flow.kind == "cellular"
        assert cfg.seed == 42
        assert cfg.dealias

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(amplitud=3.0))
        with pytest.raises(ConfigError):
            parse_config(_simulate(flow={"kind": "cellular", "amp": 1.0}))

    def test_unknown_flow_kind(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(flow={"kind": "vortex"}))

    def test_negative_dt(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(dt=-1e-3))

    def test_simulate_needs_one_formulation(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(epsilon=0.1))
        data = _simulate()
        del data["amplitude"]
        with pytest.raises(ConfigError):
            parse_config(data)

    def test_flow_required_except_for_verify(self):
        with pytest.raises(ConfigError):
            parse_config({"kind": "simulate", "amplitude": 1.0})
        assert parse_config({"kind": "verify"}).flow is None

    @pytest.mark.parametrize("amplitudes", [[1.0], [4.0, 2.0], [0.0, 1.0]])
    def test_sweep_amplitudes(self, amplitudes):
        with pytest.raises(ConfigError):
            parse_config({"kind": "sweep", "flow": {"kind": "cellular"}, "amplitudes": amplitudes})

    def test_truncations_increase(self):
        with pytest.raises(ConfigError):
            parse_config({"kind": "floquet", "flow": {"kind": "cellular"}, "truncations": [8, 4]})

    def test_tracer_needs_points(self):
        with pytest.raises(ConfigError):
            parse_config({"kind": "tracer", "flow": {"kind": "cellular"}})

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_delta_range(self, delta):
        with pytest.raises(ConfigError):
            parse_config(_simulate(delta=delta))

    def test_unknown_verdict(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(expect_verdict="MIXING"))

    def test_initial_mode_checks(self):
        with pytest.raises(ConfigError):
            parse_config(_simulate(initial={"k": [0, 0]}))
        with pytest.raises(ConfigError):
            parse_config(_simulate(initial={"k": [9, 0]}))
        with pytest.raises(ConfigError):
            parse_config(_simulate(initial={"type": "random", "band": 9}))

    def test_porous_bounds(self):
        base = {"kind": "porous", "flow": {"kind": "cellular"}, "epsilon": 0.1}
        assert parse_config(base).q == 2.0
        with pytest.raises(ConfigError):
            parse_config({**base, "q": 1.0})
        with pytest.raises(ConfigError):
            parse_config({**base, "h": 1.0})


class TestLoadConfig:
    def test_round_trip_through_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(_simulate()))
        assert load_config(path) == parse_config(_simulate())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{kind: simulate")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_top_level_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(path)


# ---------------------------------------------------------------------------
# Hashing and initial data
# ---------------------------------------------------------------------------

class TestConfigHash:
    def test_stable_under_key_order(self):
        a = parse_config(_simulate())
        b = parse_config(dict(reversed(list(_simulate().items()))))
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 64

    def test_defaults_are_hashed(self):
        assert config_hash(parse_config(_simulate())) == config_hash(parse_config(_simulate(seed=42)))

    def test_any_change_moves_the_hash(self):
        assert config_hash(parse_config(_simulate())) != config_hash(parse_config(_simulate(seed=7)))


class TestBuildInitial:
    def test_mode_is_unit(self):
        cfg = parse_config(_simulate(initial={"k": [2, 1], "shape": "cos"}))
        f = build_initial(cfg, CellularFlow())
        assert f.norm() == pytest.approx(1.0)
        assert f.coeff(2, 1) == pytest.approx(1 / 2**0.5)

    def test_random_is_seeded(self):
        cfg = parse_config(_simulate(initial={"type": "random"}, seed=3))
        a = build_initial(cfg, CellularFlow())
        b = build_initial(cfg, CellularFlow())
        assert a.coeffs.tobytes() == b.coeffs.tobytes()

    def test_amplitude_rescales(self):
        for init in ({"amplitude": 0.25}, {"type": "random", "amplitude": 0.25}):
            f = build_initial(parse_config(_simulate(initial=init)), CellularFlow())
            assert f.norm() == pytest.approx(0.25)

    def test_hamiltonian_datum(self):
        cfg = parse_config(_simulate(initial={"type": "hamiltonian"}))
        f = build_initial(cfg, CellularFlow())
        assert f.norm() == pytest.approx(1.0)
        assert f.mean == 0.0

    def test_describe(self):
        cfg = parse_config(_simulate(initial={"type": "random", "band": 2}))
        assert cfg.initial.describe(cfg.seed) == "random(seed=42,band=2)"
        assert parse_config(_simulate()).initial.describe(42) == "sin(1,0)"

    def test_flow_config_builds(self):
        cfg = parse_config({"kind": "simulate", "flow": {"kind": "uniform", "params": {"velocity": [1.0, 0.0]}}, "amplitude": 1.0})
        assert isinstance(cfg.flow.build(), UniformFlow)
