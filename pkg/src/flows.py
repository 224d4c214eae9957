"""Time-periodic incompressible velocity fields on the unit torus.

Every flow is an immutable ``FlowSpec`` with a vectorised ``velocity`` method.
Flows that jump in time (the alternating shear) report their switch times so
integrators can split steps there; ``within`` selects the piece a stage belongs
to, which makes evaluations at a switch one-sided.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, ClassVar

import numpy as np

from .models import (
    TWO_PI,
    ConfigError,
    FlowBounds,
    GridField,
    NotHamiltonian,
    NotIncompressible,
    ZeroMeanDrift,
)
from .spectral import SpectralField, grid_coordinates, to_spectral

logger = logging.getLogger("relaxlab.flows")

INFLATION = 1.05            # safety margin on sampled sup norms
DIVERGENCE_TOL = 1e-8
RATIONAL_TOL = 1e-9
MAX_DENOMINATOR = 1000        # best approximations of an irrational stay above RATIONAL_TOL
HAMILTONIAN_TOL = 1e-6


# ---------------------------------------------------------------------------
# 1-d profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """w(s) = const + sum_n sin[n-1] sin(2 pi n s) + cos[n-1] cos(2 pi n s)."""
    const: float = 0.0
    sin: tuple[float, ...] = ()
    cos: tuple[float, ...] = ()

    @classmethod
    def constant(cls, value: float) -> Profile:
        return cls(const=float(value))

    @classmethod
    def sine(cls, amplitude: float = 1.0) -> Profile:
        return cls(sin=(float(amplitude),))

    def value(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.full_like(s, self.const)
        for n, a in enumerate(self.sin, start=1):
            out = out + a * np.sin(TWO_PI * n * s)
        for n, b in enumerate(self.cos, start=1):
            out = out + b * np.cos(TWO_PI * n * s)
        return out

    def to_dict(self) -> dict:
        return {"const": self.const, "sin": list(self.sin), "cos": list(self.cos)}

    @classmethod
    def from_dict(cls, data: Any) -> Profile:
        if isinstance(data, (int, float)):
            return cls.constant(data)
        if not isinstance(data, dict):
            raise ConfigError(f"profile must be a number or an object, got {data!r}")
        unknown = set(data) - {"const", "sin", "cos"}
        if unknown:
            raise ConfigError(f"unknown profile keys: {sorted(unknown)}")
        return cls(
            const=float(data.get("const", 0.0)),
            sin=tuple(float(a) for a in data.get("sin", ())),
            cos=tuple(float(b) for b in data.get("cos", ())),
        )


# ---------------------------------------------------------------------------
# Flow specifications
# ---------------------------------------------------------------------------

class FlowSpec(ABC):
    """A time-periodic velocity field u(x, t) on [0,1)^2."""

    kind: ClassVar[str]
    period: float

    @abstractmethod
    def velocity(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        t: float,
        within: float | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Velocity components at points (x1, x2) and time t."""

    @property
    def is_stationary(self) -> bool:
        return False

    def switch_times(self) -> tuple[float, ...]:
        """Times in [0, period) where u jumps."""
        return ()

    def breakpoints(self, t0: float, t1: float) -> list[float]:
        """Switch times strictly between t0 and t1 (either order), sorted from t0."""
        switches = self.switch_times()
        if not switches:
            return []
        lo, hi = min(t0, t1), max(t0, t1)
        p = self.period
        out = []
        for base in range(math.floor(lo / p), math.floor(hi / p) + 1):
            for s in switches:
                t = base * p + s
                if lo < t < hi and abs(t - lo) > 1e-14 and abs(t - hi) > 1e-14:
                    out.append(t)
        out.sort(reverse=t1 < t0)
        return out

    @abstractmethod
    def params(self) -> dict:
        """JSON-serialisable parameters."""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params(), "period": self.period}


def _full(value: float, like: np.ndarray) -> np.ndarray:
    return np.full(np.shape(like), float(value))


@dataclass(frozen=True)
class UniformFlow(FlowSpec):
    """u(x, t) = (c1, c2); stationary, treated as period 1."""
    c1: float = 0.0
    c2: float = 0.0
    period: float = 1.0
    kind: ClassVar[str] = "uniform"

    @property
    def is_stationary(self) -> bool:
        return True

    def velocity(self, x1, x2, t, within=None):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return _full(self.c1, x1), _full(self.c2, x2)

    def params(self) -> dict:
        return {"velocity": [self.c1, self.c2]}


@dataclass(frozen=True)
class StationaryShear(FlowSpec):
    """u(x) = (0, w(x1))."""
    profile: Profile = field(default_factory=lambda: Profile.constant(2.0))
    period: float = 1.0
    kind: ClassVar[str] = "stationary_shear"

    @property
    def is_stationary(self) -> bool:
        return True

    def velocity(self, x1, x2, t, within=None):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return np.zeros_like(x1), self.profile.value(x1)

    def params(self) -> dict:
        return {"profile": self.profile.to_dict()}


@dataclass(frozen=True)
class CellularFlow(FlowSpec):
    """Stream function a sin(2 pi x1) sin(2 pi x2), u = (-psi_x2, psi_x1)."""
    amplitude: float = 1.0
    period: float = 1.0
    kind: ClassVar[str] = "cellular"

    @property
    def is_stationary(self) -> bool:
        return True

    def velocity(self, x1, x2, t, within=None):
        s1, c1 = np.sin(TWO_PI * np.asarray(x1)), np.cos(TWO_PI * np.asarray(x1))
        s2, c2 = np.sin(TWO_PI * np.asarray(x2)), np.cos(TWO_PI * np.asarray(x2))
        scale = TWO_PI * self.amplitude
        return -scale * s1 * c2, scale * c1 * s2

    def params(self) -> dict:
        return {"amplitude": self.amplitude}


@dataclass(frozen=True)
class AlternatingShear(FlowSpec):
    """u = (theta(t) w1(x2), (1 - theta(t)) w2(x1)), theta = 1 on [0, duty*p)."""
    w1: Profile = field(default_factory=Profile.sine)
    w2: Profile = field(default_factory=Profile.sine)
    duty: float = 0.5
    period: float = 1.0
    kind: ClassVar[str] = "alternating_shear"

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")
        if self.period <= 0.0:
            raise ValueError(f"period must be positive, got {self.period}")

    def switch_times(self) -> tuple[float, ...]:
        return (0.0, self.duty * self.period)

    def theta(self, t: float) -> float:
        phase = (t % self.period) / self.period
        return 1.0 if phase < self.duty else 0.0

    def velocity(self, x1, x2, t, within=None):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        theta = self.theta(t if within is None else within)
        if theta:
            return self.w1.value(x2), np.zeros_like(x1)
        return np.zeros_like(x1), self.w2.value(x1)

    def params(self) -> dict:
        return {"w1": self.w1.to_dict(), "w2": self.w2.to_dict(), "duty": self.duty}


@dataclass(frozen=True)
class DriftedFrame(FlowSpec):
    """u(x, t) = v(x + b t) - b for a stationary base v and shift b."""
    base: FlowSpec
    shift: tuple[float, float]
    kind: ClassVar[str] = "drifted_frame"

    def __post_init__(self):
        if not self.base.is_stationary:
            raise ValueError("drifted frames need a stationary base flow")
        b1, b2 = self.shift
        if abs(b1) <= RATIONAL_TOL:
            raise ZeroMeanDrift("shift has zero x1 component")
        turns = b2 / abs(b1)
        if abs(turns - round(turns)) > 1e-12:
            raise ValueError("shift b2 must be an integer multiple of |b1| for periodicity")

    @property
    def period(self) -> float:
        return 1.0 / abs(self.shift[0])

    def velocity(self, x1, x2, t, within=None):
        b1, b2 = self.shift
        v1, v2 = self.base.velocity(np.asarray(x1) + b1 * t, np.asarray(x2) + b2 * t, t)
        return v1 - b1, v2 - b2

    def params(self) -> dict:
        return {"base": self.base.to_dict(), "shift": list(self.shift)}


@dataclass(frozen=True)
class SeriesTerm:
    """a * cos(2 pi k.x + phase) * cos(2 pi harmonic t / p + time_phase)."""
    k1: int
    k2: int
    a1: float
    a2: float
    phase: float = 0.0
    harmonic: int = 0
    time_phase: float = 0.0

    @classmethod
    def from_stream(cls, k1: int, k2: int, amplitude: float, **kwargs) -> SeriesTerm:
        """Term generated by the stream function amplitude * cos(2 pi k.x + phase)."""
        phase = kwargs.pop("phase", 0.0)
        return cls(
            k1, k2,
            TWO_PI * amplitude * k2, -TWO_PI * amplitude * k1,
            phase=phase - math.pi / 2, **kwargs,
        )

    def to_dict(self) -> dict:
        return {
            "k": [self.k1, self.k2],
            "velocity": [self.a1, self.a2],
            "phase": self.phase,
            "harmonic": self.harmonic,
            "time_phase": self.time_phase,
        }


@dataclass(frozen=True)
class StreamSeries(FlowSpec):
    """Finite space-time Fourier series of the velocity."""
    terms: tuple[SeriesTerm, ...]
    period: float = 1.0
    allow_compressible: bool = False
    kind: ClassVar[str] = "stream_series"

    def __post_init__(self):
        if self.period <= 0.0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.allow_compressible:
            return
        worst = max(
            divergence_max(self, t, resolution=32)
            for t in np.linspace(0.0, self.period, 5, endpoint=False)
        )
        if worst > DIVERGENCE_TOL:
            raise NotIncompressible(f"series divergence reaches {worst:.3e}")

    @property
    def is_stationary(self) -> bool:
        return all(term.harmonic == 0 for term in self.terms)

    def velocity(self, x1, x2, t, within=None):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        u1 = np.zeros_like(x1)
        u2 = np.zeros_like(x1)
        for term in self.terms:
            spatial = np.cos(TWO_PI * (term.k1 * x1 + term.k2 * x2) + term.phase)
            temporal = math.cos(TWO_PI * term.harmonic * t / self.period + term.time_phase)
            u1 = u1 + term.a1 * spatial * temporal
            u2 = u2 + term.a2 * spatial * temporal
        return u1, u2

    def params(self) -> dict:
        return {
            "terms": [term.to_dict() for term in self.terms],
            "allow_compressible": self.allow_compressible,
        }


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def velocity_at(flow: FlowSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Velocity at point(s) x of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    u1, u2 = flow.velocity(x[..., 0] % 1.0, x[..., 1] % 1.0, t)
    return np.stack([u1, u2], axis=-1)


def sample_velocity(
    flow: FlowSpec, t: float, resolution: int, within: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    x1, x2 = grid_coordinates(resolution)
    return flow.velocity(x1, x2, t, within)


def _spectral_gradient(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    resolution = values.shape[0]
    k = np.fft.fftfreq(resolution, d=1.0 / resolution)
    if resolution % 2 == 0:
        k[resolution // 2] = 0.0
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    vhat = np.fft.fft2(values)
    d1 = np.fft.ifft2(1j * TWO_PI * k1 * vhat).real
    d2 = np.fft.ifft2(1j * TWO_PI * k2 * vhat).real
    return d1, d2


def spatial_mean(flow: FlowSpec, t: float, resolution: int = 32) -> np.ndarray:
    """Mean velocity over the torus at time t (exact for band-limited flows)."""
    if resolution < 16:
        raise ValueError(f"spatial_mean needs resolution >= 16, got {resolution}")
    u1, u2 = sample_velocity(flow, t, resolution)
    return np.array([u1.mean(), u2.mean()])


def divergence_max(
    flow: FlowSpec, t: float, resolution: int = 32, within: float | None = None
) -> float:
    """max |div u(., t)| over the grid, derivatives taken spectrally."""
    u1, u2 = sample_velocity(flow, t, resolution, within)
    d11, _ = _spectral_gradient(u1)
    _, d22 = _spectral_gradient(u2)
    return float(np.abs(d11 + d22).max())


def _sample_times(flow: FlowSpec, n_times: int) -> list[float]:
    if flow.is_stationary:
        return [0.0]
    times = set(np.linspace(0.0, flow.period, n_times, endpoint=False).tolist())
    times.update(flow.switch_times())
    return sorted(times)


def flow_bounds(flow: FlowSpec, sample_resolution: int = 64, n_times: int = 16) -> FlowBounds:
    """Sampled sup |u| and sup |grad u| (operator norm), inflated by INFLATION."""
    sup_u = 0.0
    sup_grad = 0.0
    for t in _sample_times(flow, n_times):
        u1, u2 = sample_velocity(flow, t, sample_resolution)
        sup_u = max(sup_u, float(np.sqrt(u1 * u1 + u2 * u2).max()))
        a, b = _spectral_gradient(u1)
        c, d = _spectral_gradient(u2)
        frob = a * a + b * b + c * c + d * d
        det = a * d - b * c
        spread = np.sqrt(np.maximum(frob * frob - 4.0 * det * det, 0.0))
        op_norm = np.sqrt(0.5 * (frob + spread))
        sup_grad = max(sup_grad, float(op_norm.max()))
    bounds = FlowBounds(sup_u * INFLATION, sup_grad * INFLATION, flow.period)
    logger.debug("flow_bounds %s: sup_u=%.6g sup_grad=%.6g", flow.kind, bounds.sup_u, bounds.sup_grad_u)
    return bounds


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

@dataclass
class Hamiltonian:
    """Stream function H with u = (-H_x2, H_x1), valued in R (alpha=0) or alpha*T."""
    grid: GridField
    alpha: float
    mean: np.ndarray


def rational_period(m1: float, m2: float) -> float:
    """Largest alpha with m1 and m2 integer multiples of alpha; 0 for a zero mean."""
    a1, a2 = abs(m1), abs(m2)
    if a1 <= RATIONAL_TOL and a2 <= RATIONAL_TOL:
        return 0.0
    if a1 <= RATIONAL_TOL:
        return a2
    if a2 <= RATIONAL_TOL:
        return a1
    ratio = a1 / a2
    approx = Fraction(ratio).limit_denominator(MAX_DENOMINATOR)
    if abs(ratio - float(approx)) > RATIONAL_TOL * max(1.0, ratio):
        raise NotHamiltonian(
            f"mean ({m1:.12g}, {m2:.12g}) has rationally independent coordinates"
        )
    return a2 / approx.denominator


def stream_function(flow: FlowSpec, t: float = 0.0, resolution: int = 64) -> Hamiltonian:
    """Hamiltonian of the frozen-time flow u(., t), normalised to H(0, 0) = 0."""
    mean = spatial_mean(flow, t, max(resolution, 16))
    alpha = rational_period(mean[0], mean[1])

    u1, u2 = sample_velocity(flow, t, resolution)
    k = np.fft.fftfreq(resolution, d=1.0 / resolution)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    ksq = k1 * k1 + k2 * k2
    ksq[0, 0] = 1.0
    h_hat = (k1 * np.fft.fft2(u2) - k2 * np.fft.fft2(u1)) / (1j * TWO_PI * ksq)
    h_hat[0, 0] = 0.0
    if resolution % 2 == 0:
        # Nyquist modes carry no derivative information
        h_hat[resolution // 2, :] = 0.0
        h_hat[:, resolution // 2] = 0.0
    periodic = np.fft.ifft2(h_hat).real
    if not np.all(np.isfinite(periodic)):
        raise NotHamiltonian(f"stream function of {flow.kind} has non-finite values")
    periodic -= periodic[0, 0]

    d1, d2 = _spectral_gradient(periodic)
    defect = max(
        float(np.abs(mean[0] - d2 - u1).max()),
        float(np.abs(mean[1] + d1 - u2).max()),
    )
    if defect > HAMILTONIAN_TOL * max(1.0, float(np.abs(u1).max()), float(np.abs(u2).max())):
        raise NotHamiltonian(f"stream function reproduces u only to {defect:.3e}")

    x1, x2 = grid_coordinates(resolution)
    values = mean[1] * x1 - mean[0] * x2 + periodic
    if alpha > 0.0:
        values = np.mod(values, alpha)
    logger.debug("stream_function %s t=%g alpha=%g defect=%.2e", flow.kind, t, alpha, defect)
    return Hamiltonian(GridField(values), alpha, mean)


def hamiltonian_eigenfunction(
    flow: FlowSpec,
    n_trunc: int,
    omega=None,
    t: float = 0.0,
    resolution: int | None = None,
) -> SpectralField:
    """omega(H), mean removed and normalised, for a stationary Hamiltonian flow.

    Such functions are invariant under the flow. The default omega is the
    identity for real-valued H and sin(2 pi s / alpha) for circle-valued H.
    """
    resolution = resolution or max(64, 4 * n_trunc + 1)
    ham = stream_function(flow, t, resolution)
    if omega is None:
        if ham.alpha == 0.0:
            omega = lambda s: s  # noqa: E731
        else:
            omega = lambda s: np.sin(TWO_PI * s / ham.alpha)  # noqa: E731
    values = omega(ham.grid.values)
    return to_spectral(GridField(values), n_trunc, remove_mean=True).normalized()


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def drifted_frame(v: FlowSpec, resolution: int = 32) -> DriftedFrame:
    """u(x, t) = v(x + b t) - b with b = (mean v1, 0); period 1/|mean v1|."""
    if not v.is_stationary:
        raise ValueError("drifted_frame needs a stationary base flow")
    mean = spatial_mean(v, 0.0, resolution)
    if abs(mean[0]) <= RATIONAL_TOL:
        raise ZeroMeanDrift(f"base flow has x1-mean {mean[0]:.3e}")
    logger.info("drifted_frame: base=%s b=(%.6g, 0) period=%.6g", v.kind, mean[0], 1 / abs(mean[0]))
    return DriftedFrame(base=v, shift=(float(mean[0]), 0.0))


def _series_term(data: dict) -> SeriesTerm:
    unknown = set(data) - {"k", "velocity", "stream", "phase", "harmonic", "time_phase"}
    if unknown:
        raise ConfigError(f"unknown series term keys: {sorted(unknown)}")
    try:
        k1, k2 = (int(v) for v in data["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"series term needs an integer pair 'k': {data!r}") from exc
    extra = {
        "phase": float(data.get("phase", 0.0)),
        "harmonic": int(data.get("harmonic", 0)),
        "time_phase": float(data.get("time_phase", 0.0)),
    }
    if ("velocity" in data) == ("stream" in data):
        raise ConfigError("series term needs exactly one of 'velocity' or 'stream'")
    if "stream" in data:
        return SeriesTerm.from_stream(k1, k2, float(data["stream"]), **extra)
    a1, a2 = (float(v) for v in data["velocity"])
    return SeriesTerm(k1, k2, a1, a2, **extra)


def flow_from_dict(data: dict) -> FlowSpec:
    """Build a flow from {"kind": ..., "params": {...}, "period": p}."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError(f"flow must be an object with a 'kind', got {data!r}")
    unknown = set(data) - {"kind", "params", "period"}
    if unknown:
        raise ConfigError(f"unknown flow keys: {sorted(unknown)}")
    kind = data["kind"]
    params = dict(data.get("params") or {})
    period = data.get("period")

    period_value = float(period) if period is not None else 1.0

    def take(name: str, default: Any = None) -> Any:
        return params.pop(name, default)

    try:
        if kind == "uniform":
            c1, c2 = (float(v) for v in take("velocity", (0.0, 0.0)))
            flow = UniformFlow(c1, c2, period=period_value)
        elif kind == "stationary_shear":
            flow = StationaryShear(Profile.from_dict(take("profile", 2.0)), period=period_value)
        elif kind == "cellular":
            flow = CellularFlow(float(take("amplitude", 1.0)), period=period_value)
        elif kind == "alternating_shear":
            flow = AlternatingShear(
                w1=Profile.from_dict(take("w1", {"sin": [1.0]})),
                w2=Profile.from_dict(take("w2", {"sin": [1.0]})),
                duty=float(take("duty", 0.5)),
                period=period_value,
            )
        elif kind == "drifted_frame":
            base = flow_from_dict(take("base"))
            shift = take("shift")
            if shift is None:
                flow = drifted_frame(base)
            else:
                flow = DriftedFrame(base, (float(shift[0]), float(shift[1])))
        elif kind == "stream_series":
            terms = tuple(_series_term(term) for term in take("terms", []))
            flow = StreamSeries(
                terms,
                period=period_value,
                allow_compressible=bool(take("allow_compressible", False)),
            )
        else:
            raise ConfigError(f"unknown flow kind {kind!r}")
    except (TypeError, ValueError, NotIncompressible, ZeroMeanDrift) as exc:
        raise ConfigError(f"invalid parameters for flow {kind!r}: {exc}") from exc

    if params:
        raise ConfigError(f"unknown parameters for flow {kind!r}: {sorted(params)}")
    return flow
