"""Command-line entry point: scenario runs, CBF variant batches, the
clustering benchmark, and the live websocket service."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .simulator import (
    VARIANTS,
    ScenarioConfig,
    load_scenario,
    run_batch,
    run_scenario,
    write_step_log,
)

log = logging.getLogger("guidebot")

_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    level = os.environ.get("GUIDEBOT_LOG", "warn").lower()
    logging.basicConfig(
        level=_LEVELS.get(level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _load(scenario_path: str, overrides) -> ScenarioConfig:
    config = load_scenario(scenario_path)
    for item in overrides:
        if "=" not in item:
            raise click.ClickException(f"override {item!r} must be key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        config = _apply_override(config, key.split("."), value)
    return config


def _apply_override(obj, path, value):
    field_names = {f.name for f in dataclasses.fields(obj)}
    head = path[0]
    if head not in field_names:
        raise click.ClickException(
            f"unknown config key {'.'.join(path)!r} on {type(obj).__name__}"
        )
    if len(path) == 1:
        current = getattr(obj, head)
        if isinstance(current, np.ndarray):
            value = np.asarray(value, dtype=float)
            if value.shape == (3,):
                value = np.diag(value)
        return dataclasses.replace(obj, **{head: value})
    child = _apply_override(getattr(obj, head), path[1:], value)
    return dataclasses.replace(obj, **{head: child})


@click.group()
@click.version_option(version=__version__, prog_name="guidebot")
def main() -> None:
    """Force-compliant guide-robot navigation stack."""
    _setup_logging()


@main.command()
@click.option("--scenario", required=True, type=click.Path(), help="Scenario JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key (dotted path), repeatable.")
def run(scenario, out_dir, seed, overrides) -> None:
    """Run one scenario and write the step log plus a summary."""
    try:
        config = _load(scenario, overrides)
        if seed is not None:
            config = dataclasses.replace(config, seed=seed)
    except (OSError, ValueError, json.JSONDecodeError, TypeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics, records = run_scenario(config)
    write_step_log(out / "steps.csv", records)
    summary = dataclasses.asdict(metrics)
    summary["scenario"] = config.name
    summary["seed"] = config.seed
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, default=float)
        f.write("\n")
    click.echo(
        f"{config.name}: success={metrics.success} cause={metrics.failure_cause} "
        f"t={metrics.completion_time:.1f}s steps={metrics.n_steps}"
    )
    sys.exit(0 if metrics.success else 2)


@main.command()
@click.option("--scenario", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--trials", type=int, default=24, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed base for trials.")
@click.option("--variants", default=",".join(VARIANTS), show_default=True,
              help="Comma-separated CBF variant list.")
@click.option("--workers", type=int, default=os.cpu_count() or 1, show_default="cpu count")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
def batch(scenario, out_dir, trials, seed, variants, workers, overrides) -> None:
    """Run seeded trials of each CBF variant and write the success table."""
    try:
        config = _load(scenario, overrides)
        variant_list = [v.strip() for v in variants.split(",") if v.strip()]
        for v in variant_list:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    except (OSError, ValueError, json.JSONDecodeError, TypeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_batch(config, trials, seed, variants=variant_list, workers=workers)
    (out / "success_table.csv").write_text(result.to_csv())
    for variant, n, wins, rate in result.rows:
        click.echo(f"{variant}: {wins}/{n} ({100 * rate:.1f}%)")
    sys.exit(0)


@main.command("bench-cluster")
@click.option("--sizes", default="150,300,450,600", show_default=True,
              help="Comma-separated grid edge sizes.")
@click.option("--trials", type=int, default=3, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def bench_cluster(sizes, trials, out_dir) -> None:
    """Time grid vs classical clustering on the fixed scene."""
    from .bench import run_bench, write_bench_csv, write_exponents_csv

    try:
        size_list = [int(s) for s in sizes.split(",") if s.strip()]
        if not size_list:
            raise ValueError("sizes must be non-empty")
    except ValueError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, exponents = run_bench(size_list, trials)
    write_bench_csv(out / "timings.csv", rows)
    write_exponents_csv(out / "exponents.csv", exponents)
    for method in sorted(exponents):
        click.echo(f"{method}: exponent {exponents[method]:.3f}")
    sys.exit(0)


@main.command()
@click.option("--scenario", required=True, type=click.Path())
@click.option("--bind", default="127.0.0.1:8700", show_default=True, metavar="HOST:PORT")
@click.option("--tick-hz", type=float, default=10.0, show_default=True)
def serve(scenario, bind, tick_hz) -> None:
    """Serve a live simulation over a websocket for the cockpit."""
    from .service import serve_forever

    try:
        config = load_scenario(scenario)
        host, port_str = bind.rsplit(":", 1)
        port = int(port_str)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    serve_forever(config, host, port, tick_hz)


if __name__ == "__main__":
    main()
