"""Command-line front end.

    xnsim run SCENARIO_FILE     simulate a scenario file (per-run CSVs on)
    xnsim sweep table3|FILE     multi-scenario sweep (per-run CSVs off)
    xnsim plot CSV...           SVG plots from aggregate CSVs

Exit codes: 0 success, 2 configuration problem (bad file, bad flag,
bad parameters), 3 numerical divergence during simulation. Timing and
progress go to stderr; result files land under --out.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click

from . import __version__
from .errors import ConfigurationError, NumericalDivergenceError, SweepError
from .experiment import build_sweep_report, table3_scenarios
from .kernel import sweep as run_sweep
from .model import INSOLAR, PriceProxySpec
from .output import (
    atomic_write_text,
    load_aggregate_csv,
    write_aggregate_csv,
    write_json,
    write_run_csv,
)
from .plotting import DEFAULT_PLOT_VARIABLES, plot_aggregate_tables
from .scenario import apply_overrides, load_scenarios, resolved_config_json

EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _fail(exc) -> None:
    if isinstance(exc, SweepError):
        for scenario_id, err in exc.failures:
            click.echo(f"error: scenario {scenario_id!r}: {err}", err=True)
        divergent = any(isinstance(e, NumericalDivergenceError) for _, e in exc.failures)
        sys.exit(EXIT_DIVERGENCE if divergent else EXIT_CONFIG)
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_DIVERGENCE if isinstance(exc, NumericalDivergenceError) else EXIT_CONFIG)


def _execute(specs, out_dir: Path, per_run: bool, workers) -> None:
    started = time.perf_counter()
    try:
        ensembles = run_sweep(specs, INSOLAR, max_workers=workers)
    except (ConfigurationError, NumericalDivergenceError, SweepError) as exc:
        _fail(exc)
    elapsed = time.perf_counter() - started

    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out_dir / "resolved_config.json", resolved_config_json(specs))
    for ensemble in ensembles:
        write_aggregate_csv(out_dir / f"{ensemble.scenario_id}_aggregate.csv", ensemble)
        if per_run:
            write_run_csv(out_dir / f"{ensemble.scenario_id}_runs.csv", ensemble)
    # no elapsed time in the report files: everything under --out must be
    # byte-identical across reruns of the same configuration
    report = build_sweep_report(ensembles)
    write_json(out_dir / "report.json", report.to_dict())
    atomic_write_text(out_dir / "report.txt", report.to_text())
    click.echo(report.to_text(), nl=False)
    click.echo(
        f"{len(ensembles)} scenario(s), {sum(e.runs for e in ensembles)} runs "
        f"in {elapsed:.3f} s -> {out_dir}",
        err=True,
    )


def _common_options(per_run_default: bool):
    def wrap(f):
        f = click.option(
            "--out",
            type=click.Path(file_okay=False, path_type=Path),
            default=Path("out"),
            show_default=True,
            help="Output directory.",
        )(f)
        f = click.option("--runs", type=int, default=None, help="Override runs per scenario.")(f)
        f = click.option("--horizon", type=int, default=None, help="Override horizon in days.")(f)
        f = click.option("--seed", type=int, default=None, help="Override the master seed.")(f)
        f = click.option(
            "--workers", type=int, default=None, help="Max worker processes (also capped by XNSIM_MAX_WORKERS)."
        )(f)
        f = click.option(
            "--per-run/--no-per-run",
            default=per_run_default,
            show_default=True,
            help="Also write one CSV row per run per step.",
        )(f)
        return f

    return wrap


@click.group()
@click.version_option(version=__version__, prog_name="xnsim")
def main() -> None:
    """Token-economy simulator: subsidy pool, app growth, treasury."""


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_common_options(per_run_default=True)
def run(scenario_file: Path, out: Path, runs, horizon, seed, workers, per_run: bool) -> None:
    """Simulate every scenario in SCENARIO_FILE."""
    try:
        specs = apply_overrides(load_scenarios(scenario_file), runs=runs, horizon=horizon, master_seed=seed)
    except ConfigurationError as exc:
        _fail(exc)
    _execute(specs, out, per_run, workers)


@main.command()
@click.argument("target")
@click.option(
    "--with-price/--without-price",
    default=False,
    show_default=True,
    help="Add the token price proxy to the built-in table3 scenarios.",
)
@_common_options(per_run_default=False)
def sweep(target: str, with_price: bool, out: Path, runs, horizon, seed, workers, per_run: bool) -> None:
    """Sweep the built-in pool-size experiment (TARGET "table3") or a scenario file."""
    try:
        if target == "table3":
            overrides = {"price": PriceProxySpec()} if with_price else {}
            specs = table3_scenarios(**overrides)
        else:
            path = Path(target)
            if not path.is_file():
                raise ConfigurationError(
                    f"sweep target must be 'table3' or a scenario file, got {target!r}"
                )
            if with_price:
                raise ConfigurationError(
                    "--with-price only applies to the built-in table3 target; "
                    "set model.price in the scenario file instead"
                )
            specs = load_scenarios(path)
        specs = apply_overrides(specs, runs=runs, horizon=horizon, master_seed=seed)
    except ConfigurationError as exc:
        _fail(exc)
    _execute(specs, out, per_run, workers)


@main.command()
@click.argument("csvs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--vars",
    "variables",
    default=",".join(DEFAULT_PLOT_VARIABLES),
    show_default=True,
    help="Comma-separated state variables to plot.",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("plots"),
    show_default=True,
    help="Output directory for SVGs.",
)
def plot(csvs: tuple[Path, ...], variables: str, out: Path) -> None:
    """Plot aggregate CSVs, one SVG per variable."""
    names = [v.strip() for v in variables.split(",") if v.strip()]
    if not names:
        _fail(ConfigurationError(f"--vars parsed to nothing: {variables!r}"))
    try:
        tables = []
        for path in csvs:
            label = path.stem.removesuffix("_aggregate")
            tables.append((label, load_aggregate_csv(path)))
        paths = plot_aggregate_tables(tables, names, out)
    except ConfigurationError as exc:
        _fail(exc)
    for p in paths:
        click.echo(str(p), err=True)


if __name__ == "__main__":
    main()
