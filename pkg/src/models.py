"""Data models and error types shared across the relaxlab modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np


# -- Constants --

TWO_PI = 2.0 * math.pi
FOUR_PI_SQ = 4.0 * math.pi**2

FLOW_KINDS = Literal[
    "uniform", "stationary_shear", "cellular",
    "alternating_shear", "drifted_frame", "stream_series",
]

EXPERIMENT_KINDS = Literal[
    "simulate", "sweep", "floquet", "porous", "tracer", "verify",
]

VERDICTS = Literal["ENHANCING_TREND", "NON_ENHANCING_TREND", "INCONCLUSIVE"]

ROUGHNESS_VERDICTS = Literal["H1_EIGENFUNCTION_CANDIDATE", "ROUGH", "INCONCLUSIVE"]


# -- Errors --

class RelaxlabError(Exception):
    """Base class for every error raised by the toolkit."""


class ResolutionError(RelaxlabError, ValueError):
    """Grid resolution too small for the requested truncation."""


class TruncationMismatch(RelaxlabError, ValueError):
    """Two spectral fields with different truncations were combined."""


class NotHamiltonian(RelaxlabError):
    """The flow's mean fails the rational-dependence test."""


class ZeroMeanDrift(RelaxlabError):
    """A drifted frame was requested for a base flow with zero x1-mean."""


class NotIncompressible(RelaxlabError):
    """A flow table produced a velocity with nonzero divergence."""


class CFLViolation(RelaxlabError):
    """The time step exceeds the stability bound of the scheme."""


class NumericalInstability(RelaxlabError):
    """A NaN or Inf appeared during time stepping."""


class DecompositionError(RelaxlabError):
    """Eigen-decomposition of a period matrix failed or is pathological."""


class NotAnEigenfunction(RelaxlabError):
    """A witness field is not an eigenfunction of the period operator."""


class BoundsViolation(RelaxlabError):
    """A porous-medium state left its two-sided bound."""


class InsufficientSweep(RelaxlabError):
    """An amplitude sweep is too short to classify."""


class ConfigError(RelaxlabError):
    """An experiment configuration failed validation."""


class InvariantFailure(RelaxlabError):
    """A runtime invariant check failed during an experiment."""


# -- Data Classes --

@dataclass(frozen=True)
class WaveIndex:
    """Lattice wavenumber; the physical wavevector is 2*pi*(k1, k2)."""
    k1: int
    k2: int

    @property
    def norm_sq(self) -> int:
        return self.k1 * self.k1 + self.k2 * self.k2

    @property
    def eigenvalue(self) -> float:
        return FOUR_PI_SQ * self.norm_sq


@dataclass(frozen=True)
class GridField:
    """Real values on the uniform R x R grid; values[i, j] sits at (i/R, j/R)."""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"grid values must be square, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class FlowBounds:
    """Sup norms of a flow and its Lipschitz growth envelope B(t)."""
    sup_u: float
    sup_grad_u: float
    period: float

    def envelope(self, t: float) -> float:
        """B(t) = exp(|t| * sup_grad_u)."""
        return math.exp(abs(t) * self.sup_grad_u)

    @property
    def b1(self) -> float:
        """sup of B over [0, 1]."""
        return self.envelope(1.0)

    def envelope_sq_integral(self, t: float) -> float:
        """Integral of B(s)^2 over [0, t]."""
        rate = 2.0 * self.sup_grad_u
        if rate * t < 1e-12:
            return t
        return math.expm1(rate * t) / rate


@dataclass
class CharacteristicPath:
    """Sampled solution of dX/dt = u(X, t), wrapped to the unit torus."""
    times: np.ndarray       # shape (n,)
    points: np.ndarray      # shape (n, 2), each in [0, 1)^2
    dt: float
    flow_kind: str

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


@dataclass
class TrajectoryRecord:
    """Observables of one advection-diffusion run."""
    times: list[float]
    l2_sq: list[float]          # mean-zero part, sum |c_k|^2 over k != 0
    h1_sq: list[float]          # sum lambda_k |c_k|^2
    mean_value: float
    diffusivity: float
    dissipation_residuals: list[float] = field(default_factory=list)
    mean_drift: float = 0.0     # max |mean(t) - mean(0)| seen during the run

    def __len__(self) -> int:
        return len(self.times)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.l2_sq))

    def is_monotone(self, rtol: float = 1e-12) -> bool:
        l2 = np.asarray(self.l2_sq)
        return bool(np.all(np.diff(l2) <= rtol * l2[:-1] + 1e-300))


@dataclass
class EigenPair:
    """One eigenpair of a period matrix with its roughness diagnostics."""
    eigenvalue: complex
    modulus: float
    phase: float
    h1_rayleigh: float
    participation_entropy: float
    vector: np.ndarray = field(repr=False)  # unit L^2 coefficients on the mean-zero basis


@dataclass
class EigenReport:
    """Eigen-decomposition of a period matrix, sorted by h1_rayleigh."""
    n_trunc: int
    defect: float
    pairs: list[EigenPair]

    def h1_values(self) -> np.ndarray:
        return np.array([p.h1_rayleigh for p in self.pairs])

    @property
    def min_h1(self) -> float:
        return float(self.h1_values().min())

    @property
    def median_h1(self) -> float:
        return float(np.median(self.h1_values()))


@dataclass
class RoughnessRow:
    n_trunc: int
    min_h1: float
    median_h1: float
    defect: float


@dataclass
class RoughnessProfile:
    rows: list[RoughnessRow]
    verdict: str            # one of ROUGHNESS_VERDICTS


@dataclass
class RelaxationCurve:
    """Relaxation times tau_delta(A) over an increasing amplitude list."""
    amplitudes: list[float]
    taus: list[float | None]    # None marks a run that never crossed delta
    delta: float
    tau_max: float
    phi0_descriptor: str

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.amplitudes, self.amplitudes[1:])):
            raise ValueError("amplitudes must be strictly increasing")
        if len(self.taus) != len(self.amplitudes):
            raise ValueError("one tau per amplitude is required")

    @property
    def saturated(self) -> list[bool]:
        return [tau is None for tau in self.taus]


@dataclass
class SdistReport:
    """Distance between a diffusive run and the free evolution, with its bound."""
    epsilon: float
    times: list[float]
    lhs: list[float]
    rhs: list[float]
    passed: bool
    slack: float = 0.05


@dataclass
class WitnessReport:
    """Outcome of a non-enhancement witness over several diffusivities."""
    eigenvalue: complex
    residual: float
    tau: float
    b1: float
    epsilons: list[float]
    final_norms: list[float]
    threshold: float
    passed: bool


@dataclass(frozen=True)
class PorousState:
    """Positive grid values of a porous-medium solution at one time."""
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def resolution(self) -> int:
        return self.values.shape[0]


@dataclass
class PorousTrajectory:
    """Observables of one porous-medium run."""
    times: list[float]
    var_l2_sq: list[float]      # ||phi - mean||^2
    minima: list[float]
    maxima: list[float]
    dissipation: list[float]    # integral of phi^(q-1) |grad phi|^2
    mean_value: float
    q: float
    diffusivity: float
    dissipation_residuals: list[float] = field(default_factory=list)
    mean_drift: float = 0.0

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class RunManifest:
    """What one CLI run produced and which checks it passed."""
    kind: str
    config_hash: str
    artifacts: list[str]
    checks: dict[str, bool]
    wall_time: float
    version: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())
