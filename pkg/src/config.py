"""Experiment configuration: the JSON schema every CLI run is validated against."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .flows import FlowSpec, flow_from_dict, hamiltonian_eigenfunction
from .models import EXPERIMENT_KINDS, FLOW_KINDS, ConfigError
from .spectral import SpectralField, random_field

logger = logging.getLogger("relaxlab.config")

VERDICT_NAMES = (
    "ENHANCING_TREND", "NON_ENHANCING_TREND", "INCONCLUSIVE",
    "H1_EIGENFUNCTION_CANDIDATE", "ROUGH",
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FlowConfig(_Strict):
    kind: FLOW_KINDS
    params: dict[str, Any] = Field(default_factory=dict)
    period: float | None = Field(default=None, gt=0)

    def build(self) -> FlowSpec:
        return flow_from_dict(self.model_dump(exclude_none=True))


class InitialConfig(_Strict):
    """Initial datum: a single Fourier mode, seeded random data, or omega(H) of the flow."""
    type: Literal["mode", "random", "hamiltonian"] = "mode"
    k: tuple[int, int] = (1, 0)
    shape: Literal["sin", "cos"] = "sin"
    amplitude: float | None = None      # None: unit L^2 norm
    band: int | None = Field(default=None, ge=1)
    offset: float = 0.0                 # added background (porous runs)

    def describe(self, seed: int) -> str:
        if self.type == "mode":
            return f"{self.shape}({self.k[0]},{self.k[1]})"
        if self.type == "random":
            return f"random(seed={seed},band={self.band})"
        return "omega(H)"


class ExperimentConfig(_Strict):
    kind: EXPERIMENT_KINDS
    flow: FlowConfig | None = None
    n_trunc: int = Field(default=16, ge=1, le=128)
    dt: float | None = Field(default=None, gt=0)
    amplitude: float | None = Field(default=None, ge=0)
    epsilon: float | None = Field(default=None, gt=0)
    amplitudes: list[float] | None = None
    epsilons: list[float] | None = None
    delta: float = Field(default=0.1, gt=0, lt=1)
    tau_max: float = Field(default=1.0, gt=0)
    q: float = Field(default=2.0, gt=1)
    h: float = Field(default=0.5, gt=0, lt=1)
    truncations: list[int] | None = None
    seed: int = Field(default=42, ge=0)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    t_end: float = Field(default=0.1, gt=0)
    dealias: bool = True
    record_stride: int = Field(default=1, ge=1)
    points: list[tuple[float, float]] | None = None
    t_start: float = 0.0
    expect_verdict: str | None = None
    output_dir: str | None = None

    @model_validator(mode="after")
    def _check_kind(self) -> ExperimentConfig:
        if self.kind != "verify" and self.flow is None:
            raise ValueError(f"experiment {self.kind!r} needs a flow")
        if self.kind in ("simulate", "porous") and (self.amplitude is None) == (self.epsilon is None):
            raise ValueError(f"experiment {self.kind!r} needs exactly one of amplitude or epsilon")
        if self.kind == "sweep":
            amps = self.amplitudes or []
            if len(amps) < 2 or any(b <= a for a, b in zip(amps, amps[1:])) or amps[0] <= 0:
                raise ValueError("sweep needs strictly increasing positive amplitudes")
        if self.truncations is not None:
            ts = self.truncations
            if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] < 1:
                raise ValueError("truncations must be increasing with at least two entries")
        if self.kind == "tracer" and not self.points:
            raise ValueError("tracer needs at least one start point")
        if self.epsilons is not None and any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if self.expect_verdict is not None and self.expect_verdict not in VERDICT_NAMES:
            raise ValueError(f"expect_verdict must be one of {VERDICT_NAMES}")
        if self.initial.band is not None and self.initial.band > self.n_trunc:
            raise ValueError("initial.band cannot exceed n_trunc")
        if self.initial.type == "mode":
            if tuple(self.initial.k) == (0, 0):
                raise ValueError("initial mode must be nonconstant")
            if max(map(abs, self.initial.k)) > self.n_trunc:
                raise ValueError("initial mode lies outside the truncation")
        return self


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment configuration."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    cfg = parse_config(data)
    logger.debug("loaded %s config from %s", cfg.kind, path)
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form of the validated config."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_initial(cfg: ExperimentConfig, flow: FlowSpec) -> SpectralField:
    """The mean-zero unit (unless amplitude is given) initial field of a run."""
    init = cfg.initial
    if init.type == "random":
        field = random_field(cfg.n_trunc, cfg.seed, init.band)
    elif init.type == "hamiltonian":
        field = hamiltonian_eigenfunction(flow, cfg.n_trunc)
    else:
        field = SpectralField.mode(cfg.n_trunc, init.k[0], init.k[1], init.shape).normalized()
    if init.amplitude is not None:
        field = field.normalized().scaled(init.amplitude)
    return field
