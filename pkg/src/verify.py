"""Bundled invariant suite at pinned desk-scale settings.

Failures are data: every check returns a CheckResult, and a RelaxlabError
raised inside a check (a CFL violation after a dt override, for instance) is
recorded against that check instead of aborting the suite.

Environment overrides, read only here:
  RELAXLAB_FORCE_NO_DEALIAS=1   run every check without 2/3-rule dealiasing
  RELAXLAB_DT_SCALE=<float>     multiply every pinned time step
"""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping

import numpy as np

from .artifacts import DECAY_HEADER, decay_rows, render_csv
from .diagnostics import (
    RelaxationQuery,
    amplitude_sweep,
    classify,
    dissipation_budget,
    non_enhancement_witness,
    sdist_check,
)
from .floquet import build_period_matrix, roughness_profile
from .flows import (
    DIVERGENCE_TOL,
    AlternatingShear,
    CellularFlow,
    FlowSpec,
    Profile,
    SeriesTerm,
    StationaryShear,
    StreamSeries,
    UniformFlow,
    divergence_max,
    drifted_frame,
)
from .models import FOUR_PI_SQ, GridField, RelaxlabError, TrajectoryRecord
from .porous import (
    PorousConfig,
    PorousState,
    max_principle_holds,
    pm_dissipation_residual,
    pm_evolve,
    pm_witness,
)
from .solver import SolverConfig, cached_bounds, dissipation_residual, evolve, spectral_gap_decay_margin
from .spectral import (
    SpectralField,
    dealiased_resolution,
    grid_coordinates,
    random_field,
    sobolev_norm_sq,
    to_spectral,
)
from .transport import free_evolve

logger = logging.getLogger("relaxlab.verify")


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float | None = None
    detail: str = ""
    seconds: float = 0.0


@dataclass
class VerifyReport:
    checks: list[CheckResult]
    settings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "settings": self.settings,
            "checks": [asdict(c) for c in self.checks],
        }


@dataclass(frozen=True)
class _Settings:
    dealias: bool = True
    dt_scale: float = 1.0

    def dt(self, pinned: float) -> float:
        return pinned * self.dt_scale


def _settings_from(env: Mapping[str, str]) -> _Settings:
    dealias = env.get("RELAXLAB_FORCE_NO_DEALIAS", "") not in ("1", "true", "yes")
    try:
        scale = float(env.get("RELAXLAB_DT_SCALE", "1"))
    except ValueError:
        logger.warning("ignoring non-numeric RELAXLAB_DT_SCALE=%r", env.get("RELAXLAB_DT_SCALE"))
        scale = 1.0
    return _Settings(dealias, scale if scale > 0 else 1.0)


def _sine(n_trunc: int, k1: int = 1, k2: int = 0, kind: str = "sin") -> SpectralField:
    return SpectralField.mode(n_trunc, k1, k2, kind).normalized()


def _conserves(traj: TrajectoryRecord) -> bool:
    return traj.mean_drift <= 1e-12 * max(1.0, abs(traj.mean_value)) and traj.is_monotone()


def _builtin_flows() -> list[FlowSpec]:
    return [
        UniformFlow(0.3, 0.7),
        StationaryShear(),
        CellularFlow(),
        AlternatingShear(),
        drifted_frame(StationaryShear(Profile(const=1.0, sin=(0.5,)))),
        StreamSeries((SeriesTerm.from_stream(1, 1, 0.05, harmonic=1),)),
    ]


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_heat_exactness(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=8, dt=s.dt(1e-4), amplitude=1.0, t_end=0.1, dealias=s.dealias)
    traj, _ = evolve(_sine(8), UniformFlow(), cfg)
    err = abs(traj.norms()[-1] / math.exp(-FOUR_PI_SQ * 0.1) - 1.0)
    return err <= 1e-8 and _conserves(traj), err, "relative error of the final norm"


def check_energy_identity(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=8, dt=s.dt(5e-6), amplitude=8.0, t_end=2e-4, dealias=s.dealias)
    traj, _ = evolve(_sine(8, 8, 0, "cos"), CellularFlow(), cfg)
    residual = dissipation_residual(traj)
    return residual <= 1e-3 and _conserves(traj), residual, "max relative energy-identity defect"


def check_cellular_decay(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=16, dt=s.dt(1e-5), amplitude=64.0, t_end=1e-3, dealias=s.dealias)
    traj, _ = evolve(random_field(16, 42), CellularFlow(), cfg)
    ratio = dissipation_budget(traj)
    return _conserves(traj) and ratio <= 1.0 + 1e-3, ratio, "dissipation budget ratio"


def check_budget_saturation(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=4, dt=s.dt(1e-4), amplitude=1.0, t_end=0.25, dealias=s.dealias)
    traj, _ = evolve(_sine(4), UniformFlow(), cfg)
    ratio = dissipation_budget(traj)
    return abs(ratio - 1.0) <= 1e-3, ratio, "budget ratio on a run to l2 < 1e-8"


def check_sdist(s: _Settings) -> tuple[bool, float, str]:
    report = sdist_check(CellularFlow(), 1e-2, random_field(8, 42), 0.25, dealias=s.dealias)
    worst = max(a / b for a, b in zip(report.lhs, report.rhs) if b > 0)
    return report.passed, worst, "max lhs/rhs"


def check_witness(s: _Settings) -> tuple[bool, float, str]:
    report = non_enhancement_witness(StationaryShear(), _sine(4), [1e-1, 1e-2, 1e-3])
    err = max(abs(norm - math.exp(-1.0)) for norm in report.final_norms)
    return report.passed and err <= 1e-4, err, "max |final - exp(-1)|"


def check_floquet_identity(s: _Settings) -> tuple[bool, float, str]:
    V = build_period_matrix(UniformFlow(), 4, 1e-2)
    err = float(np.abs(V.entries - np.eye(V.dim)).max())
    return err <= 1e-12, err, "max |V - I|"


def check_floquet_translation(s: _Settings) -> tuple[bool, float, str]:
    V = build_period_matrix(UniformFlow(1.0, 0.0), 4, 1e-2)
    err = float(np.abs(V.entries - np.eye(V.dim)).max())
    return err <= 1e-6, err, "max |V - I| for a unit translation"


def check_floquet_phases(s: _Settings) -> tuple[bool, float, str]:
    flow = UniformFlow(0.0, 2.0, period=0.25)
    V = build_period_matrix(flow, 4, 1e-2)
    expected = np.exp(-2j * np.pi * (V.basis @ np.array([0.0, 0.5])))
    err = float(np.abs(V.entries - np.diag(expected)).max())
    return err <= 1e-8, err, "max deviation from the translation phases"


def check_roughness_shear(s: _Settings) -> tuple[bool, float, str]:
    profile = roughness_profile(StationaryShear(), [2, 4], 1e-2)
    spread = profile.rows[-1].min_h1 / profile.rows[0].min_h1
    return profile.verdict == "H1_EIGENFUNCTION_CANDIDATE", spread, profile.verdict


def check_porous(s: _Settings) -> tuple[bool, float, str]:
    cfg = PorousConfig(q=2.0, h=0.5, n_trunc=8, dt=s.dt(2e-4), epsilon=0.1, t_end=0.05, dealias=s.dealias)
    x1, _ = grid_coordinates(25)
    state = PorousState(1.0 + 0.25 * np.sin(2 * np.pi * x1))
    traj, _ = pm_evolve(state, CellularFlow(), cfg)
    residual = pm_dissipation_residual(traj)
    ok = (
        traj.mean_drift <= 1e-10
        and max_principle_holds(traj)
        and all(b <= a * (1 + 1e-12) for a, b in zip(traj.var_l2_sq, traj.var_l2_sq[1:]))
        and residual <= 1e-3
    )
    return ok, residual, "porous dissipation residual"


def check_sweep_non_enhancing(s: _Settings, threads: int | None = None) -> tuple[bool, float, str]:
    template = SolverConfig(n_trunc=4, amplitude=1.0, dealias=s.dealias)
    query = RelaxationQuery(0.5, 0.1, _sine(4), StationaryShear(), template, "sin(1,0)")
    curve = amplitude_sweep(query, [1.0, 4.0, 16.0, 64.0], threads)
    verdict = classify(curve)
    expected = math.log(2.0) / FOUR_PI_SQ
    err = max(abs(tau - expected) for tau in curve.taus if tau is not None)
    return verdict == "NON_ENHANCING_TREND" and err <= 1e-4, err, verdict


def check_determinism(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=6, amplitude=4.0, t_end=0.01, dealias=s.dealias)
    renders = []
    for _ in range(2):
        traj, _ = evolve(random_field(6, 7), CellularFlow(), cfg)
        renders.append(render_csv(DECAY_HEADER, decay_rows(traj), "verify"))
    return renders[0] == renders[1], float(len(renders[0])), "bytes compared"


def check_spectral_gap_margin(s: _Settings) -> tuple[bool, float, str]:
    cfg = SolverConfig(n_trunc=8, dt=s.dt(2e-5), amplitude=16.0, t_end=0.02, dealias=s.dealias)
    traj, _ = evolve(random_field(8, 42), CellularFlow(), cfg)
    margin = spectral_gap_decay_margin(traj, FOUR_PI_SQ)
    return margin >= 1.0, margin, "min bound/observed over gap intervals"


def check_transport_unitarity(s: _Settings) -> tuple[bool, float, str]:
    f = random_field(16, 5, band=1)
    worst = 0.0
    for flow in (StationaryShear(), AlternatingShear()):
        g = free_evolve(flow, f, 0.0, flow.period, s.dt(1e-3))
        worst = max(worst, abs(g.norm() - 1.0))
    return worst <= 1e-3, worst, "max |norm - 1| after one period"


def check_transport_envelope(s: _Settings) -> tuple[bool, float, str]:
    flow = CellularFlow()
    f = random_field(16, 5, band=2)
    g = free_evolve(flow, f, 0.0, 0.25, s.dt(1e-3))
    growth = math.sqrt(sobolev_norm_sq(g, 1) / sobolev_norm_sq(f, 1))
    ratio = growth / cached_bounds(flow).envelope(0.25)
    return ratio <= 1.0 + 1e-2, ratio, "H1 growth over B(t)"


def check_transport_composition(s: _Settings) -> tuple[bool, float, str]:
    flow = StationaryShear()
    f = random_field(16, 5, band=1)
    dt = s.dt(1e-2)
    direct = free_evolve(flow, f, 0.0, 1.0, dt)
    split = free_evolve(flow, free_evolve(flow, f, 0.0, 0.4, dt), 0.4, 1.0, dt)
    err = (direct - split).norm()
    return err <= 1e-6, err, "||U(1,0) f - U(1,0.4) U(0.4,0) f||"


def check_flow_periodicity(s: _Settings) -> tuple[bool, float, str]:
    x1, x2 = grid_coordinates(16)
    x1, x2 = x1 + 0.013, x2 + 0.029
    worst_shift = worst_div = 0.0
    for flow in _builtin_flows():
        for t in (0.0, 0.3 * flow.period, 0.7 * flow.period):
            base = np.stack(flow.velocity(x1, x2, t))
            later = np.stack(flow.velocity(x1, x2, t + flow.period))
            moved = np.stack(flow.velocity(x1 + 1.0, x2 - 1.0, t))
            worst_shift = max(worst_shift, float(np.abs(later - base).max()), float(np.abs(moved - base).max()))
            worst_div = max(worst_div, divergence_max(flow, t))
    ok = worst_shift <= 1e-9 and worst_div <= DIVERGENCE_TOL
    return ok, max(worst_shift, worst_div), f"max shift defect {worst_shift:.1e}, max divergence {worst_div:.1e}"


def check_roughness_cellular(s: _Settings) -> tuple[bool, float, str]:
    profile = roughness_profile(CellularFlow(), [4, 8], 1e-3)
    err = max(abs(row.min_h1 / (2.0 * FOUR_PI_SQ) - 1.0) for row in profile.rows)
    return profile.verdict == "H1_EIGENFUNCTION_CANDIDATE" and err <= 1e-4, err, profile.verdict


def check_roughness_alternating(s: _Settings) -> tuple[bool, float, str]:
    profile = roughness_profile(AlternatingShear(), [8, 16], 1e-2)
    growth = profile.rows[-1].min_h1 / profile.rows[0].min_h1
    return growth > 1.0, growth, f"min_h1 growth N=8 to N=16, {profile.verdict}"


def check_sdist_alternating(s: _Settings) -> tuple[bool, float, str]:
    report = sdist_check(AlternatingShear(), 1e-2, random_field(8, 42), 0.75, dealias=s.dealias)
    worst = max(a / b for a, b in zip(report.lhs, report.rhs) if b > 0)
    return report.passed, worst, "max lhs/rhs across the switch"


def check_porous_witness(s: _Settings) -> tuple[bool, float, str]:
    cfg = PorousConfig(q=2.0, h=0.2, n_trunc=4, epsilon=0.1, dealias=s.dealias)
    report = pm_witness(StationaryShear(), _sine(4), cfg, [1e-1, 1e-2])
    low = min(report.final_norms)
    return report.passed, low, f"min final fluctuation, threshold {report.threshold}"


def check_porous_linear_limit(s: _Settings) -> tuple[bool, float, str]:
    n = 8
    x1, _ = grid_coordinates(dealiased_resolution(n))
    state = PorousState(1.0 + 0.25 * np.sin(2 * np.pi * x1))
    near_linear = PorousConfig(q=1.0 + 1e-6, h=0.5, n_trunc=n, epsilon=0.1, t_end=0.02,
                               dealias=s.dealias, record_stride=10**9)
    pm_traj, _ = pm_evolve(state, CellularFlow(), near_linear)
    fluct = to_spectral(GridField(state.values - state.values.mean()), n, remove_mean=True)
    lin_cfg = SolverConfig(n_trunc=n, epsilon=0.1, t_end=0.02, dealias=s.dealias, record_stride=10**9)
    lin, _ = evolve(fluct, CellularFlow(), lin_cfg)
    gap = abs(pm_traj.var_l2_sq[-1] / lin.l2_sq[-1] - 1.0)
    return gap <= 1e-3, gap, "relative variance gap to the linear solver at q = 1 + 1e-6"


CHECKS: list[tuple[str, Callable]] = [
    ("heat_exactness", check_heat_exactness),
    ("energy_identity", check_energy_identity),
    ("cellular_decay", check_cellular_decay),
    ("budget_saturation", check_budget_saturation),
    ("sdist_bound", check_sdist),
    ("non_enhancement_witness", check_witness),
    ("floquet_identity", check_floquet_identity),
    ("floquet_translation", check_floquet_translation),
    ("floquet_phases", check_floquet_phases),
    ("roughness_shear", check_roughness_shear),
    ("porous_q2", check_porous),
    ("sweep_non_enhancing", check_sweep_non_enhancing),
    ("determinism", check_determinism),
    ("spectral_gap_margin", check_spectral_gap_margin),
    ("transport_unitarity", check_transport_unitarity),
    ("transport_envelope", check_transport_envelope),
    ("transport_composition", check_transport_composition),
    ("flow_periodicity", check_flow_periodicity),
    ("roughness_cellular", check_roughness_cellular),
    ("roughness_alternating", check_roughness_alternating),
    ("sdist_alternating", check_sdist_alternating),
    ("porous_witness", check_porous_witness),
    ("porous_linear_limit", check_porous_linear_limit),
]


def run_suite(threads: int | None = None, env: Mapping[str, str] | None = None) -> VerifyReport:
    """Run every pinned check and collect pass/fail data."""
    settings = _settings_from(os.environ if env is None else env)
    logger.info("verify: dealias=%s dt_scale=%g", settings.dealias, settings.dt_scale)
    results = []
    for name, check in CHECKS:
        started = time.perf_counter()
        try:
            if check is check_sweep_non_enhancing:
                passed, value, detail = check(settings, threads)
            else:
                passed, value, detail = check(settings)
        except RelaxlabError as exc:
            passed, value, detail = False, None, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - started
        results.append(CheckResult(name, bool(passed), value, detail, elapsed))
        logger.info("verify %-24s %s (%.2fs)", name, "PASS" if passed else "FAIL", elapsed)
    return VerifyReport(results, {"dealias": settings.dealias, "dt_scale": settings.dt_scale})
