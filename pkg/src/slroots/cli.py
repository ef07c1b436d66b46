"""Command line entry point: ``slroots run|list-problems|dump-matrices``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import sys

import click

from .harness import (
    ConfigError,
    StageError,
    dump_matrices,
    export,
    load_config,
    registry,
    run,
)
from .problem import ProblemError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _fail(exc: Exception) -> None:
    cause = exc.cause if isinstance(exc, StageError) else exc
    code = EXIT_CONFIG if isinstance(cause, (ConfigError, ProblemError)) else EXIT_NUMERICAL
    if isinstance(cause, OSError):
        code = EXIT_CONFIG
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _config(path: str, seed: int | None):
    cfg = load_config(path)
    if seed is not None:
        cfg = load_config({**cfg.model_dump(mode="json"), "seed": seed})
    return cfg


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Galerkin eigenvalue experiments for Sturm-Liouville problems."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory; defaults to output.path in the config.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override the config seed.")
def run_cmd(config_path, out_dir, fmt, seed):
    """Run one experiment and write its report."""
    try:
        cfg = _config(config_path, seed)
        report = run(cfg)
        out = out_dir or cfg.output.path
        if out is None:
            click.echo(report.to_json())
            return
        for path in export(report, fmt or cfg.output.format, out):
            click.echo(str(path))
    except (ConfigError, ProblemError, StageError, OSError, ArithmeticError, ValueError) as exc:
        _fail(exc)


@main.command("list-problems")
def list_problems():
    """List the experiment registry."""
    for name in registry():
        click.echo(name)


@main.command("dump-matrices")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None)
def dump_cmd(config_path, out_dir, seed):
    """Write M, K0 and D of the configured system as JSON matrices."""
    try:
        cfg = _config(config_path, seed)
        for path in dump_matrices(cfg, out_dir):
            click.echo(str(path))
    except (ConfigError, ProblemError, StageError, OSError, ArithmeticError, ValueError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
