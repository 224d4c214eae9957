"""Relaxation times, amplitude sweeps and the quantitative runtime checks.

Enhancement verdicts are trend surrogates computed from a finite sweep; they
never claim the limit statement over all amplitudes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .flows import FlowSpec
from .floquet import require_eigenfunction
from .models import (
    InsufficientSweep,
    RelaxationCurve,
    SdistReport,
    TrajectoryRecord,
    WitnessReport,
)
from .solver import SolverConfig, cached_bounds, evolve, resolve_dt
from .spectral import SpectralField, sobolev_norm_sq
from .transport import free_evolve

logger = logging.getLogger("relaxlab.diagnostics")

UNIT_TOL = 1e-10
JITTER = 0.05
ENHANCING_DROP = 0.25
FLAT_VARIATION = 0.10
MIN_SWEEP_POINTS = 4
MIN_SWEEP_SPAN = 32.0
SDIST_SLACK = 0.05
WITNESS_FLOOR = 0.25
WITNESS_SLACK = 0.05


# ---------------------------------------------------------------------------
# Relaxation times
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelaxationQuery:
    """Threshold, horizon, unit initial data and the solver template for a sweep."""
    delta: float
    tau_max: float
    phi0: SpectralField
    flow: FlowSpec
    template: SolverConfig
    descriptor: str = "phi0"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.tau_max <= 0.0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")
        if abs(self.phi0.norm() - 1.0) > UNIT_TOL:
            raise ValueError(f"phi0 must have unit norm, got {self.phi0.norm():.12g}")


def crossing_time(times: list[float], norms: np.ndarray, delta: float) -> float | None:
    """First time the norms drop below delta, interpolated linearly in log norm."""
    below = np.nonzero(norms < delta)[0]
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return float(times[0])
    n0, n1 = norms[i - 1], norms[i]
    t0, t1 = times[i - 1], times[i]
    if n1 <= 0.0:
        return float(t1)
    frac = (math.log(delta) - math.log(n0)) / (math.log(n1) - math.log(n0))
    return float(t0 + frac * (t1 - t0))


def relaxation_time(q: RelaxationQuery, amplitude: float) -> float | None:
    """tau_delta(A), or None when the norm never crosses delta before tau_max."""
    cfg = replace(q.template, amplitude=amplitude, epsilon=None, t_end=q.tau_max)
    traj, _ = evolve(q.phi0, q.flow, cfg, stop_below=q.delta)
    tau = crossing_time(traj.times, traj.norms(), q.delta)
    logger.debug("relaxation_time A=%g tau=%s", amplitude, tau)
    return tau


def amplitude_sweep(
    q: RelaxationQuery, amplitudes: list[float], threads: int | None = None
) -> RelaxationCurve:
    """Relaxation time per amplitude; runs are independent and share phi0."""
    amplitudes = [float(a) for a in amplitudes]
    if any(b <= a for a, b in zip(amplitudes, amplitudes[1:])):
        raise ValueError("amplitudes must be strictly increasing")
    logger.info("amplitude_sweep: flow=%s %d amplitudes threads=%s", q.flow.kind, len(amplitudes), threads)
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        taus = list(pool.map(lambda a: relaxation_time(q, a), amplitudes))
    return RelaxationCurve(amplitudes, taus, q.delta, q.tau_max, q.descriptor)


def classify(curve: RelaxationCurve) -> str:
    """ENHANCING_TREND, NON_ENHANCING_TREND or INCONCLUSIVE for a finite sweep."""
    amps = curve.amplitudes
    if len(amps) < MIN_SWEEP_POINTS or amps[-1] / amps[0] < MIN_SWEEP_SPAN:
        raise InsufficientSweep(
            f"need >= {MIN_SWEEP_POINTS} amplitudes spanning a factor >= {MIN_SWEEP_SPAN:g}, "
            f"got {len(amps)} spanning {amps[-1] / amps[0]:.3g}"
        )
    taus = [math.inf if tau is None else tau for tau in curve.taus]
    if all(math.isinf(tau) for tau in taus):
        return "NON_ENHANCING_TREND"

    nonincreasing = all(b <= a * (1.0 + JITTER) for a, b in zip(taus, taus[1:]))
    if taus[-1] <= ENHANCING_DROP * taus[0] and nonincreasing:
        return "ENHANCING_TREND"

    peak = max(taus)
    if math.isfinite(peak) and peak > 0.0:
        variation = sum(abs(b - a) for a, b in zip(taus, taus[1:]))
        if variation <= FLAT_VARIATION * peak:
            return "NON_ENHANCING_TREND"
    return "INCONCLUSIVE"


# ---------------------------------------------------------------------------
# Runtime checks
# ---------------------------------------------------------------------------

def dissipation_budget(traj: TrajectoryRecord, diffusivity: float | None = None) -> float:
    """2 kappa int h1 dt over the initial squared norm (at most 1 for exact runs)."""
    kappa = traj.diffusivity if diffusivity is None else diffusivity
    spent = 2.0 * kappa * float(np.trapezoid(traj.h1_sq, traj.times))
    return spent / traj.l2_sq[0]


def sdist_check(
    flow: FlowSpec,
    epsilon: float,
    phi0: SpectralField,
    horizon: float,
    dt: float | None = None,
    n_records: int = 10,
    dealias: bool = True,
) -> SdistReport:
    """Distance between the diffusive and free evolutions against its a priori bound."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    bounds = cached_bounds(flow)
    base = SolverConfig(n_trunc=phi0.n_trunc, dt=dt, epsilon=epsilon,
                        t_end=horizon / n_records, dealias=dealias, record_stride=10**9)
    step_dt, _ = resolve_dt(base, flow)
    h1_0 = sobolev_norm_sq(phi0, 1)

    times, lhs, rhs = [], [], []
    current = phi0
    for j in range(1, n_records + 1):
        t0 = horizon * (j - 1) / n_records
        _, current = evolve(current, flow, base, t0=t0)
        t = horizon * j / n_records
        free = free_evolve(flow, phi0, 0.0, t, step_dt)
        times.append(t)
        lhs.append((current - free).norm_sq())
        rhs.append(0.5 * epsilon * h1_0 * bounds.envelope_sq_integral(t))

    passed = all(a <= b * (1.0 + SDIST_SLACK) for a, b in zip(lhs, rhs))
    logger.info("sdist_check: flow=%s eps=%g final lhs=%.3e rhs=%.3e passed=%s",
                flow.kind, epsilon, lhs[-1], rhs[-1], passed)
    return SdistReport(epsilon, times, lhs, rhs, passed, SDIST_SLACK)


def non_enhancement_witness(
    flow: FlowSpec,
    psi: SpectralField,
    epsilons: list[float],
    dt: float | None = None,
    eigen_dt: float = 1e-3,
) -> WitnessReport:
    """Runs from an H^1 eigenfunction of the period operator stay above 1/4.

    psi must be a verified eigenfunction; the run time tau/eps uses
    tau = B_1^-2 / ||psi||_1^2 with B_1 from the inflated flow bounds.
    """
    mu, residual = require_eigenfunction(flow, psi, eigen_dt)
    phi0 = psi.without_mean().normalized()
    b1 = cached_bounds(flow).b1
    tau = 1.0 / (b1 * b1 * sobolev_norm_sq(phi0, 1))
    threshold = WITNESS_FLOOR * (1.0 - WITNESS_SLACK)

    finals = []
    for eps in epsilons:
        cfg = SolverConfig(n_trunc=psi.n_trunc, dt=dt, epsilon=eps, t_end=tau / eps, record_stride=10**9)
        traj, _ = evolve(phi0, flow, cfg)
        finals.append(float(traj.norms()[-1]))
        logger.debug("witness eps=%g final=%.6f", eps, finals[-1])

    passed = all(norm >= threshold for norm in finals)
    logger.info("non_enhancement_witness: flow=%s tau=%.6g passed=%s", flow.kind, tau, passed)
    return WitnessReport(mu, residual, tau, b1, list(epsilons), finals, threshold, passed)
