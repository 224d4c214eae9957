"""Experiment-scale acceptance run: eleven criteria, one rich table.

    python eval/acceptance.py              # everything (tens of minutes)
    python eval/acceptance.py --only 1 3 8 # a subset
    python eval/acceptance.py --quick      # cap truncations at 32

Logs go to acceptance.log; artifacts of the config-driven runs go to --out.
"""

import argparse
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from dotenv import load_dotenv
from rich import box
from rich.console import Console
from rich.table import Table

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.diagnostics import (  # noqa: E402
    dissipation_budget,
    non_enhancement_witness,
    sdist_check,
)
from src.floquet import build_period_matrix, roughness_profile  # noqa: E402
from src.flows import AlternatingShear, CellularFlow, StationaryShear, UniformFlow  # noqa: E402
from src.models import FOUR_PI_SQ, GridField, RelaxlabError  # noqa: E402
from src.porous import (  # noqa: E402
    PorousConfig,
    PorousState,
    max_principle_holds,
    pm_dissipation_residual,
    pm_evolve,
    pm_witness,
)
from src.runner import run  # noqa: E402
from src.solver import SolverConfig, evolve  # noqa: E402
from src.spectral import SpectralField, dealiased_resolution, grid_coordinates, random_field, to_spectral  # noqa: E402

CONFIGS = Path(__file__).parent / "configs"
logger = logging.getLogger("relaxlab.acceptance")


def _sine(n_trunc: int) -> SpectralField:
    return SpectralField.mode(n_trunc, 1, 0, "sin").normalized()


# ---------------------------------------------------------------------------
# Criteria: each returns (passed, summary)
# ---------------------------------------------------------------------------

def heat_exactness(ctx):
    manifest = run(CONFIGS / "heat.json", ctx.out / "heat")
    rows = (ctx.out / "heat" / "decay.csv").read_text().splitlines()
    final_l2_sq = float(rows[-2].split(",")[1])
    err = abs(math.sqrt(final_l2_sq) / math.exp(-FOUR_PI_SQ * 0.1) - 1.0)
    return manifest.passed and err <= 1e-8, f"rel. error {err:.2e}"


def energy_identity(ctx):
    manifest = run(CONFIGS / "cellular_energy.json", ctx.out / "cellular_energy")
    residual = manifest.details.get("dissipation_residual", math.inf)
    return manifest.passed and residual <= 1e-3, f"residual {residual:.2e}"


def conservation(ctx):
    runs = [
        (UniformFlow(), _sine(8), 1.0),
        (CellularFlow(), random_field(16, 42), 64.0),
        (AlternatingShear(), random_field(16, 42), 32.0),
    ]
    worst = 0.0
    monotone = True
    for flow, phi0, amplitude in runs:
        traj, _ = evolve(phi0, flow, SolverConfig(n_trunc=phi0.n_trunc, amplitude=amplitude, t_end=0.02))
        worst = max(worst, traj.mean_drift)
        monotone = monotone and traj.is_monotone()
    return worst <= 1e-12 and monotone, f"mean drift {worst:.1e}, monotone={monotone}"


def sdist_bound(ctx):
    phi0 = random_field(32, 42)
    parts = []
    ok = True
    for flow in (CellularFlow(), AlternatingShear()):
        reports = [sdist_check(flow, eps, phi0, 1.0) for eps in (1e-2, 1e-3)]
        ratio = reports[0].lhs[-1] / reports[1].lhs[-1]
        ok = ok and all(r.passed for r in reports) and 5.0 <= ratio <= 20.0
        parts.append(f"{flow.kind} ratio {ratio:.1f}")
    return ok, ", ".join(parts)


def budget(ctx):
    ratios = []
    for flow, amplitude in ((CellularFlow(), 16.0), (AlternatingShear(), 16.0)):
        traj, _ = evolve(random_field(16, 42), flow, SolverConfig(n_trunc=16, amplitude=amplitude, t_end=0.05))
        ratios.append(dissipation_budget(traj))
    cfg = SolverConfig(n_trunc=4, dt=1e-4, amplitude=1.0, t_end=0.25)
    traj, _ = evolve(_sine(4), UniformFlow(), cfg)
    saturated = dissipation_budget(traj)
    ok = max(ratios) <= 1.0 + 1e-3 and 0.99 <= saturated <= 1.0 + 1e-3
    return ok, f"max {max(ratios):.4f}, saturated {saturated:.4f}"


def witness(ctx):
    report = non_enhancement_witness(StationaryShear(), _sine(8), [1e-1, 1e-2, 1e-3])
    err = max(abs(v - math.exp(-1.0)) for v in report.final_norms)
    return report.passed and err <= 1e-4, f"min final {min(report.final_norms):.5f}, |.-1/e| {err:.1e}"


def enhancement_trend(ctx):
    manifest = run(CONFIGS / "sweep_alternating.json", ctx.out / "sweep_a", threads=ctx.threads)
    taus = manifest.details["taus"]
    drop = taus[-1] is not None and taus[0] is not None and taus[-1] <= 0.25 * taus[0]
    return manifest.passed and drop, f"verdict {manifest.details['verdict']}"


def floquet_sanity(ctx):
    n = 16
    V0 = build_period_matrix(UniformFlow(), n, 1e-2)
    e0 = float(np.abs(V0.entries - np.eye(V0.dim)).max())
    V1 = build_period_matrix(UniformFlow(1.0, 0.0), n, 1e-2)
    e1 = float(np.abs(V1.entries - np.eye(V1.dim)).max())
    V2 = build_period_matrix(UniformFlow(0.0, 2.0, period=0.25), n, 1e-2)
    phases = np.exp(-2j * np.pi * (V2.basis @ np.array([0.0, 0.5])))
    e2 = float(np.abs(V2.entries - np.diag(phases)).max())
    return e0 <= 1e-12 and e1 <= 1e-6 and e2 <= 1e-8, f"{e0:.1e} / {e1:.1e} / {e2:.1e}"


def roughness(ctx):
    truncations = [8, 16, 32] if ctx.quick else [8, 16, 32, 48]
    verdicts = {}
    for flow in (StationaryShear(), CellularFlow(), AlternatingShear()):
        profile = roughness_profile(flow, truncations, 1e-3)
        verdicts[flow.kind] = profile
    growth = verdicts["alternating_shear"].rows[-1].min_h1 / verdicts["alternating_shear"].rows[1].min_h1
    ok = (
        verdicts["stationary_shear"].verdict == "H1_EIGENFUNCTION_CANDIDATE"
        and verdicts["cellular"].verdict == "H1_EIGENFUNCTION_CANDIDATE"
        and growth >= 2.0
    )
    return ok, ", ".join(f"{k}: {p.verdict}" for k, p in verdicts.items()) + f", growth {growth:.2f}"


def porous(ctx):
    n = 8
    x1, _ = grid_coordinates(dealiased_resolution(n))
    state = PorousState(1.0 + 0.25 * np.sin(2 * np.pi * x1))
    cfg = PorousConfig(q=2.0, h=0.5, n_trunc=n, epsilon=0.1, t_end=0.05)
    traj, _ = pm_evolve(state, CellularFlow(), cfg)
    residual = pm_dissipation_residual(traj)

    near_linear = PorousConfig(q=1.0 + 1e-6, h=0.5, n_trunc=n, epsilon=0.1, t_end=0.05, record_stride=10**9)
    pm_traj, _ = pm_evolve(state, CellularFlow(), near_linear)
    fluct = to_spectral(GridField(state.values - state.values.mean()), n, remove_mean=True)
    lin, _ = evolve(fluct, CellularFlow(), SolverConfig(n_trunc=n, epsilon=0.1, t_end=0.05, record_stride=10**9))
    q_gap = abs(pm_traj.var_l2_sq[-1] / lin.l2_sq[-1] - 1.0)

    report = pm_witness(StationaryShear(), _sine(n), PorousConfig(q=2.0, h=0.2, n_trunc=n, epsilon=0.1), [1e-1, 1e-2])
    ok = (
        traj.mean_drift <= 1e-10
        and max_principle_holds(traj)
        and residual <= 1e-3
        and q_gap <= 1e-3
        and report.passed
    )
    return ok, f"residual {residual:.1e}, q->1 gap {q_gap:.1e}, witness min {min(report.final_norms):.3f}"


def determinism(ctx):
    run(CONFIGS / "sweep_alternating.json", ctx.out / "det_a", threads=ctx.threads)
    run(CONFIGS / "sweep_alternating.json", ctx.out / "det_b", threads=1)
    a = (ctx.out / "det_a" / "curve.csv").read_bytes()
    b = (ctx.out / "det_b" / "curve.csv").read_bytes()
    return a == b, f"{len(a)} bytes compared"


CRITERIA = [
    (1, "heat exactness", heat_exactness),
    (2, "energy identity", energy_identity),
    (3, "mean / monotone", conservation),
    (4, "semigroup distance", sdist_bound),
    (5, "dissipation budget", budget),
    (6, "non-enhancement witness", witness),
    (7, "enhancement trend", enhancement_trend),
    (8, "period operator sanity", floquet_sanity),
    (9, "roughness dichotomy", roughness),
    (10, "porous medium", porous),
    (11, "determinism", determinism),
]


class _Context:
    def __init__(self, out: Path, threads: int, quick: bool):
        self.out = out
        self.threads = threads
        self.quick = quick


def acceptance():
    load_dotenv()
    logging.basicConfig(
        filename="acceptance.log",
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        filemode="w",
    )
    console = Console()

    parser = argparse.ArgumentParser(description="Run the relaxlab acceptance criteria")
    parser.add_argument("--only", type=int, nargs="+", help="Criterion numbers to run")
    parser.add_argument("--out", help="Artifact directory (default: a temporary directory)")
    parser.add_argument("--threads", type=int, default=int(os.environ.get("RELAXLAB_THREADS", "1") or 1))
    parser.add_argument("--quick", action="store_true", help="Cap the roughness truncations at 32")
    args = parser.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="relaxlab-acceptance-"))
    ctx = _Context(out, max(1, args.threads), args.quick)
    selected = [c for c in CRITERIA if not args.only or c[0] in args.only]

    table = Table(title="relaxlab acceptance", box=box.SIMPLE)
    table.add_column("#", justify="right", style="dim")
    table.add_column("Criterion", style="cyan")
    table.add_column("Result", justify="center")
    table.add_column("Seconds", justify="right")
    table.add_column("Detail", style="dim")

    failures = 0
    for number, name, criterion in selected:
        console.print(f"[bold]{number:>2}. {name}...[/bold]")
        started = time.perf_counter()
        try:
            passed, detail = criterion(ctx)
        except RelaxlabError as exc:
            logger.exception("criterion %d raised", number)
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - started
        failures += not passed
        logger.info("criterion %d %s: %s (%.1fs) %s", number, name, passed, elapsed, detail)
        table.add_row(
            str(number), name,
            "[green]PASS[/green]" if passed else "[bold red]FAIL[/bold red]",
            f"{elapsed:.1f}", detail,
        )

    console.print(table)
    console.print(f"[dim]artifacts: {out}[/dim]")
    return 0 if failures == 0 else 2


if __name__ == "__main__":
    sys.exit(acceptance())
