"""Advection-diffusion time stepping on the truncated Fourier lattice.

Both formulations share one stepper for

    phi_t + c * u(x, r*t) . grad(phi) = kappa * Laplacian(phi)

with (c, r, kappa) = (A, A, 1) in the amplitude form and (1, 1, eps) in the
diffusivity form. Each step is Strang-split: an exact diffusion half-step, an
RK4 advection step on the Galerkin-truncated transport term, and another
diffusion half-step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .flows import FlowSpec, flow_bounds
from .models import (
    FOUR_PI_SQ,
    TWO_PI,
    CFLViolation,
    FlowBounds,
    NumericalInstability,
    TrajectoryRecord,
)
from .spectral import (
    SpectralField,
    collocation_resolution,
    dealiased_resolution,
    grid_coordinates,
    grid_to_lattice,
    laplacian_symbol,
    lattice_to_grid,
    wavenumbers,
)

logger = logging.getLogger("relaxlab.solver")

CFL_SAFETY = 0.5


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    """One advection-diffusion run.

    Exactly one of ``amplitude`` (fast clock, unit diffusivity) or ``epsilon``
    (slow clock, diffusivity epsilon) selects the formulation. ``dt=None``
    picks the largest stable step that divides ``t_end`` evenly.
    """
    n_trunc: int
    dt: float | None = None
    amplitude: float | None = None
    epsilon: float | None = None
    t_end: float = 1.0
    dealias: bool = True
    record_stride: int = 1
    cfl_safety: float = CFL_SAFETY

    def __post_init__(self):
        if (self.amplitude is None) == (self.epsilon is None):
            raise ValueError("exactly one of amplitude or epsilon must be set")
        if self.amplitude is not None and self.amplitude < 0.0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amplitude}")
        if self.epsilon is not None and self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def speed(self) -> float:
        return self.amplitude if self.amplitude is not None else 1.0

    @property
    def clock(self) -> float:
        return self.amplitude if self.amplitude is not None else 1.0

    @property
    def diffusivity(self) -> float:
        return 1.0 if self.epsilon is None else self.epsilon

    @property
    def grid_resolution(self) -> int:
        if self.dealias:
            return dealiased_resolution(self.n_trunc)
        return collocation_resolution(self.n_trunc)

    def rescaled(self) -> SolverConfig:
        """The diffusivity-form twin of an amplitude-form config (t -> A t)."""
        if self.amplitude is None:
            raise ValueError("rescaled() maps an amplitude config to its epsilon twin")
        a = self.amplitude
        if a <= 0.0:
            raise ValueError("rescaling needs a positive amplitude")
        return replace(
            self,
            amplitude=None,
            epsilon=1.0 / a,
            t_end=self.t_end * a,
            dt=None if self.dt is None else self.dt * a,
        )


def cfl_limit(n_trunc: int, speed: float, diffusivity: float, bounds: FlowBounds,
              safety: float = CFL_SAFETY) -> float:
    """safety * min(1/(speed sup_u 2 pi N), 1/(kappa 4 pi^2 N^2))."""
    advective = speed * bounds.sup_u * TWO_PI * n_trunc
    diffusive = diffusivity * FOUR_PI_SQ * n_trunc * n_trunc
    limits = [1.0 / rate for rate in (advective, diffusive) if rate > 0.0]
    return safety * min(limits) if limits else math.inf


@lru_cache(maxsize=64)
def cached_bounds(flow: FlowSpec) -> FlowBounds:
    return flow_bounds(flow)


def resolve_dt(cfg: SolverConfig, flow: FlowSpec, span: float | None = None) -> tuple[float, int]:
    """(dt, n_steps) covering *span* (default t_end); raises CFLViolation."""
    span = cfg.t_end if span is None else span
    limit = cfl_limit(cfg.n_trunc, cfg.speed, cfg.diffusivity, cached_bounds(flow), cfg.cfl_safety)
    if cfg.dt is None:
        if span == 0.0:
            return 0.0, 0
        if math.isinf(limit):
            return span, 1
        n_steps = max(1, math.ceil(span / limit))
        return span / n_steps, n_steps
    if cfg.dt > limit * (1.0 + 1e-12):
        raise CFLViolation(f"dt={cfg.dt:.6g} exceeds the stability limit {limit:.6g}")
    n_steps = max(0, round(span / cfg.dt))
    if n_steps and abs(n_steps * cfg.dt - span) > 1e-9 * max(1.0, span):
        n_steps = math.ceil(span / cfg.dt)
    return (span / n_steps if n_steps else cfg.dt), n_steps


# ---------------------------------------------------------------------------
# Advection
# ---------------------------------------------------------------------------

class Advection:
    """Galerkin-truncated transport term -c * P_N[u(x, r t) . grad g]."""

    def __init__(self, flow: FlowSpec, n_trunc: int, resolution: int,
                 speed: float, clock: float):
        self.flow = flow
        self.n_trunc = n_trunc
        self.resolution = resolution
        self.speed = speed
        self.clock = clock
        k1, k2 = wavenumbers(n_trunc)
        self._d1 = 1j * TWO_PI * k1
        self._d2 = 1j * TWO_PI * k2
        self._x1, self._x2 = grid_coordinates(resolution)
        self._cache: dict[tuple[float, float | None], tuple[np.ndarray, np.ndarray]] = {}

    def _velocity(self, t: float, within: float | None) -> tuple[np.ndarray, np.ndarray]:
        key = (0.0, None) if self.flow.is_stationary else (t, within)
        if key not in self._cache:
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = self.flow.velocity(self._x1, self._x2, key[0], key[1])
        return self._cache[key]

    def rhs(self, coeffs: np.ndarray, t: float, within: float | None = None) -> np.ndarray:
        if self.speed == 0.0:
            return np.zeros_like(coeffs)
        u1, u2 = self._velocity(self.clock * t, within)
        g1 = lattice_to_grid(self._d1 * coeffs, self.resolution)
        g2 = lattice_to_grid(self._d2 * coeffs, self.resolution)
        out = -self.speed * grid_to_lattice(u1 * g1 + u2 * g2, self.n_trunc)
        out[self.n_trunc, self.n_trunc] = 0.0
        return out

    def segments(self, t0: float, t1: float) -> list[tuple[float, float]]:
        """Split [t0, t1] where the flow switches, in physical time."""
        if self.speed == 0.0 or self.clock == 0.0:
            return [(t0, t1)]
        marks = [t0] + [s / self.clock for s in self.flow.breakpoints(self.clock * t0, self.clock * t1)] + [t1]
        return [(a, b) for a, b in zip(marks, marks[1:]) if b > a]

    def advance(self, coeffs: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """RK4 from t0 to t1, one stage set per switch-free segment."""
        for a, b in self.segments(t0, t1):
            h = b - a
            piece = self.clock * 0.5 * (a + b)
            k1 = self.rhs(coeffs, a, piece)
            k2 = self.rhs(coeffs + 0.5 * h * k1, a + 0.5 * h, piece)
            k3 = self.rhs(coeffs + 0.5 * h * k2, a + 0.5 * h, piece)
            k4 = self.rhs(coeffs + h * k3, b, piece)
            coeffs = coeffs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return coeffs


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

class _Stepper:
    def __init__(self, flow: FlowSpec, cfg: SolverConfig, dt: float):
        self.dt = dt
        self.advection = Advection(flow, cfg.n_trunc, cfg.grid_resolution, cfg.speed, cfg.clock)
        self.half_decay = np.exp(-cfg.diffusivity * laplacian_symbol(cfg.n_trunc) * dt / 2.0)

    def __call__(self, coeffs: np.ndarray, t: float) -> np.ndarray:
        coeffs = coeffs * self.half_decay
        coeffs = self.advection.advance(coeffs, t, t + self.dt)
        return coeffs * self.half_decay


def step(f: SpectralField, flow: FlowSpec, cfg: SolverConfig, t: float) -> SpectralField:
    """Advance f by one step of cfg.dt starting at time t."""
    limit = cfl_limit(cfg.n_trunc, cfg.speed, cfg.diffusivity, cached_bounds(flow), cfg.cfl_safety)
    if cfg.dt is None:
        dt = limit if math.isfinite(limit) else cfg.t_end
    else:
        dt = cfg.dt
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation(f"dt={dt:.6g} exceeds the stability limit {limit:.6g}")
    coeffs = _Stepper(flow, cfg, dt)(np.asarray(f.coeffs), t)
    return SpectralField.from_lattice(f.n_trunc, coeffs, mean_zero=f.mean_zero)


def _observe(coeffs: np.ndarray, lam: np.ndarray, centre: int) -> tuple[float, float, float]:
    power = np.abs(coeffs) ** 2
    mean = float(coeffs[centre, centre].real)
    l2 = float(power.sum() - power[centre, centre])
    h1 = float(np.sum(lam * power))
    return l2, h1, mean


def evolve(
    phi0: SpectralField,
    flow: FlowSpec,
    cfg: SolverConfig,
    t0: float = 0.0,
    stop_below: float | None = None,
) -> tuple[TrajectoryRecord, SpectralField]:
    """Integrate from t0 to t0 + t_end, recording every record_stride steps.

    ``stop_below`` ends the run at the first record whose mean-zero L^2 norm
    is below the given value.
    """
    if phi0.n_trunc != cfg.n_trunc:
        raise ValueError(f"phi0 has n_trunc={phi0.n_trunc}, config expects {cfg.n_trunc}")
    if not np.all(np.isfinite(phi0.coeffs)):
        raise ValueError("phi0 has non-finite coefficients")
    dt, n_steps = resolve_dt(cfg, flow)
    stepper = _Stepper(flow, cfg, dt) if n_steps else None
    lam = laplacian_symbol(cfg.n_trunc)
    centre = cfg.n_trunc

    coeffs = np.array(phi0.coeffs)
    l2, h1, mean0 = _observe(coeffs, lam, centre)
    times, l2s, h1s = [t0], [l2], [h1]
    drift = 0.0
    logger.info(
        "evolve: flow=%s N=%d dt=%.3g steps=%d kappa=%.3g speed=%.3g",
        flow.kind, cfg.n_trunc, dt, n_steps, cfg.diffusivity, cfg.speed,
    )

    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        coeffs = stepper(coeffs, t)
        if not np.all(np.isfinite(coeffs)):
            raise NumericalInstability(f"non-finite coefficients at t={t + dt:.6g} (step {i})")
        if i % cfg.record_stride == 0 or i == n_steps:
            l2, h1, mean = _observe(coeffs, lam, centre)
            drift = max(drift, abs(mean - mean0))
            times.append(t0 + i * dt)
            l2s.append(l2)
            h1s.append(h1)
            if stop_below is not None and math.sqrt(max(l2, 0.0)) < stop_below:
                logger.debug("evolve: crossed %.3g at t=%.6g", stop_below, times[-1])
                break

    record = TrajectoryRecord(
        times=times,
        l2_sq=l2s,
        h1_sq=h1s,
        mean_value=mean0,
        diffusivity=cfg.diffusivity,
        mean_drift=drift,
    )
    record.dissipation_residuals = residual_series(record)
    final = SpectralField.from_lattice(cfg.n_trunc, coeffs, mean_zero=phi0.mean_zero)
    logger.info("evolve: done t=%.6g l2=%.6e", times[-1], math.sqrt(max(l2s[-1], 0.0)))
    return record, final


# ---------------------------------------------------------------------------
# Energy identities
# ---------------------------------------------------------------------------

def centred_rate(times: list[float], values: list[float]) -> np.ndarray:
    """d/dt of *values* at interior records.

    Positive series are differenced in log space, which is exact for a pure
    exponential and second order otherwise.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    span = t[2:] - t[:-2]
    if np.all(v > 0.0):
        logv = np.log(v)
        return v[1:-1] * (logv[2:] - logv[:-2]) / span
    return (v[2:] - v[:-2]) / span


def residual_series(traj: TrajectoryRecord) -> list[float]:
    """Relative defect of d/dt l2 = -2 kappa h1 at each interior record."""
    if len(traj) < 3:
        return []
    rate = centred_rate(traj.times, traj.l2_sq)
    sink = 2.0 * traj.diffusivity * np.asarray(traj.h1_sq[1:-1])
    return (np.abs(rate + sink) / (sink + 1e-14)).tolist()


def dissipation_residual(traj: TrajectoryRecord, cfg: SolverConfig | None = None) -> float:
    """Worst relative defect of the energy identity over interior records."""
    if len(traj) < 3:
        raise ValueError("dissipation_residual needs at least 3 records")
    series = traj.dissipation_residuals or residual_series(traj)
    return float(max(series))


def spectral_gap_decay_margin(traj: TrajectoryRecord, gap: float, rtol: float = 1e-3) -> float:
    """Smallest ratio of the decay bound to the observed l2 over gap intervals.

    On every run of consecutive records with h1 >= gap * l2, the squared norm
    must satisfy l2(b) <= exp(-2 kappa gap (b - a)) l2(a) (1 + rtol). Values
    >= 1 mean the bound holds; infinity means no record qualified.
    """
    t = np.asarray(traj.times)
    l2 = np.asarray(traj.l2_sq)
    ok = np.asarray(traj.h1_sq) >= gap * l2 * (1.0 - 1e-12)
    margin = math.inf
    i = 0
    while i < len(t):
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(t) and ok[j + 1]:
            j += 1
        for b in range(i + 1, j + 1):
            bound = math.exp(-2.0 * traj.diffusivity * gap * (t[b] - t[i])) * l2[i] * (1.0 + rtol)
            if l2[b] > 0.0:
                margin = min(margin, bound / l2[b])
        i = j + 1
    return margin


def refinement_drift(phi0: SpectralField, flow: FlowSpec, cfg: SolverConfig) -> float:
    """Relative change of the final l2_sq when dt is halved."""
    dt, _ = resolve_dt(cfg, flow)
    coarse, _ = evolve(phi0, flow, replace(cfg, dt=dt, record_stride=10**9))
    fine, _ = evolve(phi0, flow, replace(cfg, dt=dt / 2.0, record_stride=10**9))
    a, b = coarse.l2_sq[-1], fine.l2_sq[-1]
    return abs(a - b) / max(abs(b), 1e-300)
