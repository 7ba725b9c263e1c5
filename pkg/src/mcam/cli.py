"""Command line entry points.

`mcam bench run` executes the measurement suite against a config file and
writes CSV or text reports.  `mcam serve` starts the gateway on a
wall-clock session.  Configuration problems exit with status 2.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .bench import format_text, load_bench_config, run_suite, write_csv
from .config import ConfigError


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.group()
def bench() -> None:
    """Measurement suite."""


@bench.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--strategy", type=click.Choice(["all", "one"]), default=None,
              help="Override the switching strategy from the config.")
@click.option("--subsets", type=click.Choice(["all", "single"]), default=None,
              help="Run every camera subset or just the full set.")
@click.option("--format", "formats", type=click.Choice(["csv", "text"]), multiple=True,
              help="Report formats to write (default: both).")
def bench_run(config_path: Path, out_dir: Path, strategy: str | None,
              subsets: str | None, formats: tuple[str, ...]) -> None:
    """Run the suite and write reports under OUT."""
    import dataclasses

    from .session import strategy_from_name

    try:
        config = load_bench_config(config_path)
        if strategy is not None:
            config = dataclasses.replace(config, strategy=strategy_from_name(strategy))
        if subsets is not None:
            config = dataclasses.replace(config, subsets=subsets)
        report = run_suite(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)

    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = formats or ("csv", "text")
    if "csv" in wanted:
        csv_path = out_dir / f"{config.scenario}.csv"
        write_csv(report, csv_path)
        click.echo(f"wrote {csv_path}")
    if "text" in wanted:
        text_path = out_dir / f"{config.scenario}.txt"
        text_path.write_text(format_text(report), encoding="utf-8")
        click.echo(f"wrote {text_path}")
    click.echo(f"{len(report.runs)} runs, strategy {report.strategy}")


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--bind", default="127.0.0.1:8000", show_default=True,
              help="Interface address as host:port.")
@click.option("--stream-fps", default=10.0, show_default=True,
              help="Frame streaming rate per WebSocket client.")
def serve_cmd(config_path: Path, bind: str, stream_fps: float) -> None:
    """Serve the HTTP/WebSocket gateway for a two-peer session."""
    import dataclasses

    from .gateway import BindError, serve
    from .session import load_session_config

    try:
        config = load_session_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    if config.clock != "wall":
        config = dataclasses.replace(config, clock="wall")
    try:
        serve(config, bind=bind, stream_fps=stream_fps)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except BindError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
