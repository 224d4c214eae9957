"""Command-line entry point: relaxlab <kind> --config <path> [--out <dir>] [--threads <n>]."""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from src import __version__
from src.config import ExperimentConfig, load_config
from src.models import ConfigError, RelaxlabError, RunManifest
from src.runner import run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2

KINDS = ("simulate", "sweep", "floquet", "porous", "tracer", "verify")


def _setup_logging(verbose: bool, console: Console) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(name)s: %(message)s",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=True)],
    )


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    raw = os.environ.get("RELAXLAB_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        logging.getLogger("relaxlab.cli").warning("ignoring RELAXLAB_THREADS=%r", raw)
        return 1


def _load(kind: str, path: str | None) -> ExperimentConfig:
    if path is None:
        if kind != "verify":
            raise ConfigError(f"'{kind}' needs --config")
        return ExperimentConfig(kind="verify")
    cfg = load_config(path)
    if cfg.kind != kind:
        raise ConfigError(f"config {path} describes a '{cfg.kind}' experiment, not '{kind}'")
    return cfg


def _show_checks(console: Console, manifest: RunManifest) -> None:
    table = Table(title=f"{manifest.kind} checks", box=box.SIMPLE)
    table.add_column("Check", style="cyan")
    table.add_column("Result", justify="center")
    for name, ok in manifest.checks.items():
        table.add_row(name, "[green]PASS[/green]" if ok else "[bold red]FAIL[/bold red]")
    console.print(table)


def _show_details(console: Console, manifest: RunManifest) -> None:
    scalars = {k: v for k, v in manifest.details.items() if not isinstance(v, (list, dict))}
    if not scalars:
        return
    table = Table(box=box.SIMPLE, show_header=False)
    table.add_column("Key", style="dim")
    table.add_column("Value")
    for key in sorted(scalars):
        value = scalars[key]
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)


def main(argv: list[str] | None = None) -> int:
    load_dotenv()

    parser = argparse.ArgumentParser(prog="relaxlab", description="Relaxation experiments for advection-diffusion on the torus")
    parser.add_argument("kind", choices=KINDS, help="Experiment kind")
    parser.add_argument("--config", help="Path to a JSON experiment config (optional for verify)")
    parser.add_argument("--out", help="Output directory (default: config output_dir or runs/<kind>)")
    parser.add_argument("--threads", type=int, help="Worker threads for sweeps (default: $RELAXLAB_THREADS or 1)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    args = parser.parse_args(argv)

    console = Console()
    _setup_logging(args.verbose, console)

    try:
        cfg = _load(args.kind, args.config)
        manifest = run(cfg, out_dir=args.out, threads=_threads(args.threads))
    except ConfigError as exc:
        console.print(Panel(str(exc), title="configuration error", border_style="red"))
        return EXIT_CONFIG
    except RelaxlabError as exc:
        console.print(Panel(f"{type(exc).__name__}: {exc}", title="run failed", border_style="red"))
        return EXIT_FAILED

    _show_checks(console, manifest)
    _show_details(console, manifest)
    status = "[bold green]passed[/bold green]" if manifest.passed else "[bold red]failed[/bold red]"
    console.print(Panel(
        f"relaxlab {__version__} · {manifest.kind} {status}\n"
        f"artifacts: {', '.join(manifest.artifacts)}\n"
        f"[dim]config {manifest.config_hash[:16]} · {manifest.wall_time:.2f} s[/dim]",
        box=box.ROUNDED,
    ))
    return EXIT_OK if manifest.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
