"""Porous-medium equation with advection, phi_t + c u . grad(phi) = kappa Lap(phi^q).

The state is band-limited to the truncation and sampled on the dealiased grid
for the nonlinear term. Steps are Strang-split: an explicit RK4 half-step of
the nonlinear diffusion, an RK4 advection step shared with the linear solver,
and a second diffusion half-step. Data must stay in [h, 1/h]; leaving that
band is reported as a scheme failure, never clipped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .flows import FlowSpec
from .floquet import require_eigenfunction
from .models import (
    FOUR_PI_SQ,
    TWO_PI,
    BoundsViolation,
    CFLViolation,
    NumericalInstability,
    PorousState,
    PorousTrajectory,
    WitnessReport,
)
from .solver import Advection, cached_bounds, centred_rate, cfl_limit
from .spectral import (
    SpectralField,
    collocation_resolution,
    dealiased_resolution,
    grid_to_lattice,
    laplacian_symbol,
    lattice_to_grid,
    sobolev_norm_sq,
    to_grid,
    wavenumbers,
)
from .diagnostics import crossing_time

logger = logging.getLogger("relaxlab.porous")

PM_CFL = 0.25
BAND_TOL = 1e-4
PM_WITNESS_THRESHOLD = 0.5 * (1.0 - 0.05)


@dataclass(frozen=True)
class PorousConfig:
    """One porous-medium run; formulation flags follow SolverConfig."""
    q: float
    h: float
    n_trunc: int
    dt: float | None = None
    amplitude: float | None = None
    epsilon: float | None = None
    t_end: float = 1.0
    dealias: bool = True
    record_stride: int = 1

    def __post_init__(self):
        if self.q <= 1.0:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if not 0.0 < self.h < 1.0:
            raise ValueError(f"h must lie in (0, 1), got {self.h}")
        if (self.amplitude is None) == (self.epsilon is None):
            raise ValueError("exactly one of amplitude or epsilon must be set")
        if self.dt is not None and self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
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

    @property
    def lower(self) -> float:
        return self.h * (1.0 - BAND_TOL)

    @property
    def upper(self) -> float:
        return (1.0 + BAND_TOL) / self.h


def pm_cfl_limit(cfg: PorousConfig, flow: FlowSpec) -> float:
    """Nonlinear diffusive limit combined with the advective one."""
    n = cfg.n_trunc
    diffusive = PM_CFL / (FOUR_PI_SQ * n * n * cfg.q * cfg.h ** (1.0 - cfg.q) * cfg.diffusivity)
    advective = cfl_limit(n, cfg.speed, 0.0, cached_bounds(flow))
    return min(diffusive, advective)


def _resolve(cfg: PorousConfig, flow: FlowSpec) -> tuple[float, int]:
    limit = pm_cfl_limit(cfg, flow)
    if cfg.dt is None:
        n_steps = max(1, math.ceil(cfg.t_end / limit)) if cfg.t_end > 0 else 0
        return (cfg.t_end / n_steps if n_steps else limit), n_steps
    if cfg.dt > limit * (1.0 + 1e-12):
        raise CFLViolation(f"dt={cfg.dt:.6g} exceeds the porous-medium limit {limit:.6g}")
    n_steps = max(0, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    return (cfg.t_end / n_steps if n_steps else cfg.dt), n_steps


class _NonlinearDiffusion:
    """kappa * P_N Lap(g^q) evaluated on the working grid."""

    def __init__(self, cfg: PorousConfig):
        self.cfg = cfg
        self.neg_lap = laplacian_symbol(cfg.n_trunc)
        k1, k2 = wavenumbers(cfg.n_trunc)
        self._d1 = 1j * TWO_PI * k1
        self._d2 = 1j * TWO_PI * k2

    def grid(self, coeffs: np.ndarray) -> np.ndarray:
        return lattice_to_grid(coeffs, self.cfg.grid_resolution)

    def rhs(self, coeffs: np.ndarray) -> np.ndarray:
        values = self.grid(coeffs)
        power = np.power(np.maximum(values, 0.0), self.cfg.q)
        out = -self.cfg.diffusivity * self.neg_lap * grid_to_lattice(power, self.cfg.n_trunc)
        out[self.cfg.n_trunc, self.cfg.n_trunc] = 0.0
        return out

    def advance(self, coeffs: np.ndarray, h: float) -> np.ndarray:
        k1 = self.rhs(coeffs)
        k2 = self.rhs(coeffs + 0.5 * h * k1)
        k3 = self.rhs(coeffs + 0.5 * h * k2)
        k4 = self.rhs(coeffs + h * k3)
        return coeffs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def dissipation(self, coeffs: np.ndarray, values: np.ndarray) -> float:
        """Mean over the torus of g^(q-1) |grad g|^2."""
        res = self.cfg.grid_resolution
        g1 = lattice_to_grid(self._d1 * coeffs, res)
        g2 = lattice_to_grid(self._d2 * coeffs, res)
        weight = np.power(np.maximum(values, 0.0), self.cfg.q - 1.0)
        return float(np.mean(weight * (g1 * g1 + g2 * g2)))


def pm_evolve(
    phi0: PorousState,
    flow: FlowSpec,
    cfg: PorousConfig,
    t0: float = 0.0,
    stop_below: float | None = None,
) -> tuple[PorousTrajectory, PorousState]:
    """Integrate the porous-medium equation, recording variance, extrema and dissipation."""
    values0 = phi0.values
    if values0.min() < cfg.h or values0.max() > 1.0 / cfg.h:
        raise BoundsViolation(
            f"initial data spans [{values0.min():.6g}, {values0.max():.6g}], outside [h, 1/h] with h={cfg.h}"
        )
    dt, n_steps = _resolve(cfg, flow)
    diffusion = _NonlinearDiffusion(cfg)
    advection = Advection(flow, cfg.n_trunc, cfg.grid_resolution, cfg.speed, cfg.clock)
    centre = cfg.n_trunc

    coeffs = grid_to_lattice(values0, cfg.n_trunc)
    coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1, ::-1]))
    mean0 = float(coeffs[centre, centre].real)

    def observe(c: np.ndarray, t: float, step: int) -> tuple[float, float, float, float]:
        values = diffusion.grid(c)
        lo, hi = float(values.min()), float(values.max())
        if lo < cfg.lower or hi > cfg.upper:
            raise BoundsViolation(
                f"state spans [{lo:.6g}, {hi:.6g}] at t={t:.6g} (step {step}), band [{cfg.lower:.6g}, {cfg.upper:.6g}]"
            )
        power = np.abs(c) ** 2
        var = float(power.sum() - power[centre, centre])
        return var, lo, hi, diffusion.dissipation(c, values)

    var, lo, hi, dis = observe(coeffs, t0, 0)
    times, variances, minima, maxima, dissipation = [t0], [var], [lo], [hi], [dis]
    drift = 0.0
    logger.info("pm_evolve: flow=%s q=%g h=%g N=%d dt=%.3g steps=%d",
                flow.kind, cfg.q, cfg.h, cfg.n_trunc, dt, n_steps)

    for i in range(1, n_steps + 1):
        t = t0 + (i - 1) * dt
        coeffs = diffusion.advance(coeffs, 0.5 * dt)
        coeffs = advection.advance(coeffs, t, t + dt)
        coeffs = diffusion.advance(coeffs, 0.5 * dt)
        if not np.all(np.isfinite(coeffs)):
            raise NumericalInstability(f"non-finite coefficients at t={t + dt:.6g} (step {i})")
        recording = i % cfg.record_stride == 0 or i == n_steps
        if recording:
            var, lo, hi, dis = observe(coeffs, t + dt, i)
            drift = max(drift, abs(float(coeffs[centre, centre].real) - mean0))
            times.append(t0 + i * dt)
            variances.append(var)
            minima.append(lo)
            maxima.append(hi)
            dissipation.append(dis)
            if stop_below is not None and math.sqrt(max(var, 0.0)) < stop_below:
                break
        else:
            values = diffusion.grid(coeffs)
            if values.min() < cfg.lower or values.max() > cfg.upper:
                raise BoundsViolation(f"state left [h, 1/h] at t={t + dt:.6g} (step {i})")

    traj = PorousTrajectory(
        times=times,
        var_l2_sq=variances,
        minima=minima,
        maxima=maxima,
        dissipation=dissipation,
        mean_value=mean0,
        q=cfg.q,
        diffusivity=cfg.diffusivity,
        mean_drift=drift,
    )
    traj.dissipation_residuals = _pm_residual_series(traj)
    final = PorousState(diffusion.grid(coeffs), times[-1])
    logger.info("pm_evolve: done t=%.6g var=%.6e min=%.6g max=%.6g", times[-1], variances[-1], minima[-1], maxima[-1])
    return traj, final


def _pm_residual_series(traj: PorousTrajectory) -> list[float]:
    if len(traj) < 3:
        return []
    rate = centred_rate(traj.times, traj.var_l2_sq)
    sink = 2.0 * traj.diffusivity * traj.q * np.asarray(traj.dissipation[1:-1])
    return (np.abs(rate + sink) / (sink + 1e-14)).tolist()


def pm_dissipation_residual(traj: PorousTrajectory, cfg: PorousConfig | None = None) -> float:
    """Worst relative defect of d/dt ||phi||^2 = -2 kappa q int phi^(q-1) |grad phi|^2."""
    if len(traj) < 3:
        raise ValueError("pm_dissipation_residual needs at least 3 records")
    series = traj.dissipation_residuals or _pm_residual_series(traj)
    return float(max(series))


def pm_dissipation_budget(traj: PorousTrajectory) -> float:
    """2 kappa q int D dt over the initial variance."""
    spent = 2.0 * traj.diffusivity * traj.q * float(np.trapezoid(traj.dissipation, traj.times))
    return spent / traj.var_l2_sq[0] if traj.var_l2_sq[0] > 0.0 else 0.0


def max_principle_holds(traj: PorousTrajectory, tol: float = 1e-6) -> bool:
    """Running minimum nondecreasing and running maximum nonincreasing within tol."""
    lo = np.asarray(traj.minima)
    hi = np.asarray(traj.maxima)
    return bool(np.all(np.diff(lo) >= -tol) and np.all(np.diff(hi) <= tol))


def pm_relaxation_time(
    flow: FlowSpec, cfg: PorousConfig, phi0: PorousState, delta: float
) -> float | None:
    """First time ||phi - mean|| drops below delta; 0 if it starts there."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    traj, _ = pm_evolve(phi0, flow, cfg, stop_below=delta)
    return crossing_time(traj.times, np.sqrt(np.maximum(traj.var_l2_sq, 0.0)), delta)


def pm_initial_state(psi: SpectralField, resolution: int | None = None) -> tuple[PorousState, float, float]:
    """phi0 = m (psi + 2 sup|psi|) with m making ||phi0 - mean|| = 1; returns (state, m, M)."""
    resolution = resolution or dealiased_resolution(psi.n_trunc)
    values = to_grid(psi, resolution).values
    sup = float(np.abs(values).max())
    m = 1.0 / psi.without_mean().norm()
    return PorousState(m * (values + 2.0 * sup)), m, sup


def pm_witness(
    flow: FlowSpec,
    psi: SpectralField,
    cfg: PorousConfig,
    epsilons: list[float],
    eigen_dt: float = 1e-3,
) -> WitnessReport:
    """Porous-medium runs from an eigenfunction-built datum keep half their variance."""
    mu, residual = require_eigenfunction(flow, psi, eigen_dt)
    phi0, m, _ = pm_initial_state(psi, dealiased_resolution(cfg.n_trunc))
    lo, hi = float(phi0.values.min()), float(phi0.values.max())
    if lo < cfg.h or hi > 1.0 / cfg.h:
        raise BoundsViolation(
            f"witness datum spans [{lo:.6g}, {hi:.6g}]; h={cfg.h} must not exceed {min(lo, 1.0 / hi):.6g}"
        )
    b1 = cached_bounds(flow).b1
    tau = cfg.h ** (cfg.q - 1.0) / (2.0 * cfg.q * m * m * b1 * b1 * sobolev_norm_sq(psi, 1))

    finals = []
    for eps in epsilons:
        run = PorousConfig(
            q=cfg.q, h=cfg.h, n_trunc=cfg.n_trunc, dt=cfg.dt, epsilon=eps,
            t_end=tau / eps, dealias=cfg.dealias, record_stride=10**9,
        )
        traj, _ = pm_evolve(phi0, flow, run)
        finals.append(math.sqrt(traj.var_l2_sq[-1]))
        logger.debug("pm_witness eps=%g final=%.6f", eps, finals[-1])

    passed = all(norm >= PM_WITNESS_THRESHOLD for norm in finals)
    logger.info("pm_witness: flow=%s tau=%.6g passed=%s", flow.kind, tau, passed)
    return WitnessReport(mu, residual, tau, b1, list(epsilons), finals, PM_WITNESS_THRESHOLD, passed)
