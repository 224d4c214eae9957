"""Batch runner: validated config in, artifacts and a RunManifest out."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    CURVE_HEADER,
    DECAY_HEADER,
    EIGEN_HEADER,
    POROUS_HEADER,
    ROUGHNESS_HEADER,
    TRACER_HEADER,
    curve_rows,
    decay_rows,
    eigen_rows,
    porous_rows,
    roughness_rows,
    tracer_rows,
    write_csv,
    write_json,
    write_manifest,
    write_summary,
)
from .config import ExperimentConfig, build_initial, config_hash, load_config
from .diagnostics import (
    RelaxationQuery,
    amplitude_sweep,
    classify,
    dissipation_budget,
    non_enhancement_witness,
)
from .floquet import build_period_matrix, eigen_report, roughness_profile
from .flows import FlowSpec
from .models import FOUR_PI_SQ, InsufficientSweep, InvariantFailure, RunManifest
from .porous import (
    PorousConfig,
    PorousState,
    max_principle_holds,
    pm_dissipation_budget,
    pm_dissipation_residual,
    pm_evolve,
    pm_witness,
)
from .solver import SolverConfig, dissipation_residual, evolve
from .spectral import dealiased_resolution, to_grid
from .transport import trace
from .verify import run_suite

logger = logging.getLogger("relaxlab.runner")

FLOQUET_DT = 1e-3
TRACER_DT = 1e-3
RESIDUAL_LIMIT = 1e-3
BUDGET_SLACK = 1e-3


@dataclass
class _Outcome:
    artifacts: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Experiment kinds
# ---------------------------------------------------------------------------

def _solver_config(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(
        n_trunc=cfg.n_trunc,
        dt=cfg.dt,
        amplitude=cfg.amplitude,
        epsilon=cfg.epsilon,
        t_end=cfg.t_end,
        dealias=cfg.dealias,
        record_stride=cfg.record_stride,
    )


def _run_simulate(cfg: ExperimentConfig, flow: FlowSpec, out: Path, chash: str, threads: int) -> _Outcome:
    phi0 = build_initial(cfg, flow)
    traj, _ = evolve(phi0, flow, _solver_config(cfg))
    result = _Outcome()
    result.artifacts.append(write_csv(out / "decay.csv", DECAY_HEADER, decay_rows(traj), chash))

    budget = dissipation_budget(traj)
    result.checks["mean_conserved"] = traj.mean_drift <= 1e-12 * max(1.0, abs(traj.mean_value))
    result.checks["l2_monotone"] = traj.is_monotone()
    result.checks["dissipation_budget"] = budget <= 1.0 + BUDGET_SLACK
    result.details.update(final_l2_sq=traj.l2_sq[-1], budget_ratio=budget, records=len(traj))
    if len(traj) >= 3 and cfg.record_stride == 1:
        residual = dissipation_residual(traj)
        result.checks["energy_identity"] = residual <= RESIDUAL_LIMIT
        result.details["dissipation_residual"] = residual
    if cfg.epsilons:
        report = non_enhancement_witness(flow, phi0, cfg.epsilons, dt=cfg.dt)
        result.checks["non_enhancement_witness"] = report.passed
        result.details.update(witness_tau=report.tau, witness_final_norms=report.final_norms)
    return result


def _run_sweep(cfg: ExperimentConfig, flow: FlowSpec, out: Path, chash: str, threads: int) -> _Outcome:
    phi0 = build_initial(cfg, flow)
    amplitudes = list(cfg.amplitudes)
    template = SolverConfig(
        n_trunc=cfg.n_trunc, dt=cfg.dt, amplitude=amplitudes[0], t_end=cfg.tau_max,
        dealias=cfg.dealias, record_stride=cfg.record_stride,
    )
    query = RelaxationQuery(cfg.delta, cfg.tau_max, phi0, flow, template, cfg.initial.describe(cfg.seed))
    curve = amplitude_sweep(query, amplitudes, threads)
    result = _Outcome()
    result.artifacts.append(write_csv(out / "curve.csv", CURVE_HEADER, curve_rows(curve), chash))
    try:
        verdict = classify(curve)
    except InsufficientSweep as exc:
        logger.warning("sweep too short to classify: %s", exc)
        verdict = "INCONCLUSIVE"
    result.checks["taus_within_horizon"] = all(tau is None or tau <= cfg.tau_max for tau in curve.taus)
    if cfg.expect_verdict:
        result.checks["expected_verdict"] = verdict == cfg.expect_verdict
    result.details.update(verdict=verdict, taus=curve.taus)
    return result


def _run_floquet(cfg: ExperimentConfig, flow: FlowSpec, out: Path, chash: str, threads: int) -> _Outcome:
    dt = cfg.dt or FLOQUET_DT
    result = _Outcome()
    if cfg.truncations:
        profile = roughness_profile(flow, cfg.truncations, dt)
        result.artifacts.append(
            write_csv(out / "roughness.csv", ROUGHNESS_HEADER, roughness_rows(profile), chash)
        )
        result.details["roughness_verdict"] = profile.verdict
        if cfg.expect_verdict:
            result.checks["expected_verdict"] = profile.verdict == cfg.expect_verdict

    V = build_period_matrix(flow, cfg.n_trunc, dt)
    report = eigen_report(V)
    result.artifacts.append(write_csv(out / "eigen.csv", EIGEN_HEADER, eigen_rows(report), chash))
    moduli = np.array([p.modulus for p in report.pairs])
    band = report.defect + 1e-9
    result.checks["poincare_floor"] = bool(report.h1_values().min() >= FOUR_PI_SQ * (1.0 - 1e-9))
    result.checks["modulus_band"] = bool(np.all(np.abs(moduli - 1.0) <= band))
    result.details.update(defect=report.defect, min_h1=report.min_h1, median_h1=report.median_h1, dim=V.dim)
    return result


def _porous_state(cfg: ExperimentConfig, flow: FlowSpec) -> PorousState:
    psi = build_initial(cfg, flow)
    values = to_grid(psi, dealiased_resolution(cfg.n_trunc)).values + cfg.initial.offset
    return PorousState(values)


def _run_porous(cfg: ExperimentConfig, flow: FlowSpec, out: Path, chash: str, threads: int) -> _Outcome:
    pcfg = PorousConfig(
        q=cfg.q, h=cfg.h, n_trunc=cfg.n_trunc, dt=cfg.dt, amplitude=cfg.amplitude,
        epsilon=cfg.epsilon, t_end=cfg.t_end, dealias=cfg.dealias, record_stride=cfg.record_stride,
    )
    traj, _ = pm_evolve(_porous_state(cfg, flow), flow, pcfg)
    result = _Outcome()
    result.artifacts.append(write_csv(out / "decay.csv", POROUS_HEADER, porous_rows(traj), chash))

    var = traj.var_l2_sq
    budget = pm_dissipation_budget(traj)
    result.checks["mean_conserved"] = traj.mean_drift <= 1e-10
    result.checks["max_principle"] = max_principle_holds(traj)
    result.checks["variance_monotone"] = all(b <= a * (1.0 + 1e-12) for a, b in zip(var, var[1:]))
    result.checks["dissipation_budget"] = budget <= 1.0 + BUDGET_SLACK
    result.details.update(final_var_l2_sq=var[-1], budget_ratio=budget, min=min(traj.minima), max=max(traj.maxima))
    if len(traj) >= 3 and cfg.record_stride == 1:
        residual = pm_dissipation_residual(traj)
        result.checks["energy_identity"] = residual <= RESIDUAL_LIMIT
        result.details["dissipation_residual"] = residual
    if cfg.epsilons:
        report = pm_witness(flow, build_initial(cfg, flow), pcfg, cfg.epsilons)
        result.checks["pm_witness"] = report.passed
        result.details.update(witness_tau=report.tau, witness_final_norms=report.final_norms)
    return result


def _run_tracer(cfg: ExperimentConfig, flow: FlowSpec, out: Path, chash: str, threads: int) -> _Outcome:
    dt = cfg.dt or TRACER_DT
    paths = [trace(flow, p, cfg.t_start, cfg.t_start + cfg.t_end, dt) for p in cfg.points]
    result = _Outcome()
    result.artifacts.append(write_csv(out / "tracer.csv", TRACER_HEADER, tracer_rows(paths), chash))
    result.checks["points_wrapped"] = all(
        bool(np.all((path.points >= 0.0) & (path.points < 1.0))) for path in paths
    )
    result.checks["times_increasing"] = all(bool(np.all(np.diff(path.times) > 0)) for path in paths)
    result.details["endpoints"] = [path.endpoint.tolist() for path in paths]
    return result


def _run_verify(cfg: ExperimentConfig, flow: FlowSpec | None, out: Path, chash: str, threads: int) -> _Outcome:
    report = run_suite(threads)
    result = _Outcome()
    result.artifacts.append(write_json(out / "verify.json", report.to_dict()))
    result.checks.update({check.name: check.passed for check in report.checks})
    result.details["settings"] = report.settings
    return result


_HANDLERS = {
    "simulate": _run_simulate,
    "sweep": _run_sweep,
    "floquet": _run_floquet,
    "porous": _run_porous,
    "tracer": _run_tracer,
    "verify": _run_verify,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run(
    config: ExperimentConfig | str | Path,
    out_dir: str | Path | None = None,
    threads: int | None = None,
) -> RunManifest:
    """Validate, execute and record one experiment.

    Configuration problems raise ConfigError before anything is written.
    Failed runtime checks are reported in the manifest; ``ensure_passed``
    turns them into an InvariantFailure.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    flow = cfg.flow.build() if cfg.flow is not None else None
    out = Path(out_dir or cfg.output_dir or Path("runs") / cfg.kind)
    chash = config_hash(cfg)
    threads = max(1, threads or 1)

    logger.info("run: kind=%s config=%s out=%s", cfg.kind, chash[:12], out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    outcome = _HANDLERS[cfg.kind](cfg, flow, out, chash, threads)
    elapsed = time.perf_counter() - started

    manifest = RunManifest(
        kind=cfg.kind,
        config_hash=chash,
        artifacts=[*outcome.artifacts, "manifest.json", "summary.txt"],
        checks=outcome.checks,
        wall_time=elapsed,
        version=__version__,
        details=_jsonable(outcome.details),
    )
    write_summary(out, manifest)
    write_manifest(out, manifest)
    logger.info("run: %s in %.2fs, %d/%d checks passed", cfg.kind, elapsed,
                sum(outcome.checks.values()), len(outcome.checks))
    return manifest


def ensure_passed(manifest: RunManifest) -> RunManifest:
    failed = [name for name, ok in manifest.checks.items() if not ok]
    if failed:
        raise InvariantFailure(f"{manifest.kind}: failed checks {', '.join(failed)}")
    return manifest


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value
