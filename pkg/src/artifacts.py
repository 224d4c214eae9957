"""CSV / JSON artifacts written by the runner.

Floats use Python's shortest round-trip repr so identical runs produce
identical bytes. Every CSV ends with a comment line naming its manifest.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from .models import (
    CharacteristicPath,
    EigenReport,
    PorousTrajectory,
    RelaxationCurve,
    RoughnessProfile,
    RunManifest,
    TrajectoryRecord,
)

logger = logging.getLogger("relaxlab.artifacts")

MANIFEST_NAME = "manifest.json"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def render_csv(header: Sequence[str], rows: Iterable[Sequence], config_hash: str) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    lines.append(f"# manifest: {MANIFEST_NAME} config={config_hash}")
    return "\n".join(lines) + "\n"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], config_hash: str) -> str:
    path.write_text(render_csv(header, rows, config_hash), encoding="utf-8", newline="\n")
    logger.debug("wrote %s", path)
    return path.name


# -- row builders --

def decay_rows(traj: TrajectoryRecord) -> list[tuple]:
    """t, l2_sq, h1_sq, dissipation_residual (blank at the two end records)."""
    residuals = [None, *traj.dissipation_residuals, None] if len(traj) >= 3 else [None] * len(traj)
    return [
        (t, l2, h1, r)
        for t, l2, h1, r in zip(traj.times, traj.l2_sq, traj.h1_sq, residuals)
    ]


DECAY_HEADER = ("t", "l2_sq", "h1_sq", "dissipation_residual")


def porous_rows(traj: PorousTrajectory) -> list[tuple]:
    residuals = [None, *traj.dissipation_residuals, None] if len(traj) >= 3 else [None] * len(traj)
    return [
        (t, v, lo, hi, r)
        for t, v, lo, hi, r in zip(traj.times, traj.var_l2_sq, traj.minima, traj.maxima, residuals)
    ]


POROUS_HEADER = ("t", "var_l2_sq", "min", "max", "dissipation_residual")


def curve_rows(curve: RelaxationCurve) -> list[tuple]:
    return [(a, tau, tau is None) for a, tau in zip(curve.amplitudes, curve.taus)]


CURVE_HEADER = ("A", "tau", "saturated_flag")


def eigen_rows(report: EigenReport) -> list[tuple]:
    return [
        (i, p.eigenvalue.real, p.eigenvalue.imag, p.modulus, p.h1_rayleigh)
        for i, p in enumerate(report.pairs)
    ]


EIGEN_HEADER = ("index", "re_eig", "im_eig", "abs_eig", "h1_rayleigh")


def roughness_rows(profile: RoughnessProfile) -> list[tuple]:
    return [(r.n_trunc, r.min_h1, r.median_h1, r.defect) for r in profile.rows]


ROUGHNESS_HEADER = ("n_trunc", "min_h1", "median_h1", "defect")


def tracer_rows(paths: list[CharacteristicPath]) -> list[tuple]:
    return [
        (i, float(t), float(p[0]), float(p[1]))
        for i, path in enumerate(paths)
        for t, p in zip(path.times, path.points)
    ]


TRACER_HEADER = ("path", "t", "x1", "x2")


# -- manifest and summary --

def write_manifest(out_dir: Path, manifest: RunManifest) -> str:
    path = out_dir / MANIFEST_NAME
    payload = asdict(manifest)
    payload["passed"] = manifest.passed
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path.name


def write_json(path: Path, payload: dict) -> str:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path.name


def write_summary(out_dir: Path, manifest: RunManifest) -> str:
    path = out_dir / "summary.txt"
    lines = [
        f"experiment: {manifest.kind}",
        f"config:     {manifest.config_hash}",
        f"version:    {manifest.version}",
        f"wall time:  {manifest.wall_time:.3f} s",
        "",
        "checks:",
    ]
    lines.extend(f"  [{'PASS' if ok else 'FAIL'}] {name}" for name, ok in manifest.checks.items())
    if manifest.details:
        lines.append("")
        lines.append("details:")
        lines.extend(f"  {key}: {value}" for key, value in sorted(manifest.details.items()))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path.name
