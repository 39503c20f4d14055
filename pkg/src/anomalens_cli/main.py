"""Main CLI entry point for anomalens."""

import sys

import click

from anomalens.logging import setup_logging
from anomalens_cli.commands import report, run, sweep, synth


@click.group()
@click.option(
    "--format",
    "-f",
    type=click.Choice(["json", "yaml", "table"]),
    default="table",
    help="Output format",
)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable debug logging",
)
@click.option(
    "--log-format",
    envvar="ANOMALENS_LOG_FORMAT",
    type=click.Choice(["json", "console"]),
    default=None,
    help="Log renderer (logs go to stderr)",
)
@click.pass_context
def cli(ctx: click.Context, format: str, verbose: bool, log_format: str | None) -> None:
    """anomalens - Score videos for anomalies, localize events and explain them."""
    ctx.ensure_object(dict)
    setup_logging(level="DEBUG" if verbose else None, fmt=log_format)
    ctx.obj["format"] = format
    ctx.obj["verbose"] = verbose


# Register subcommands
cli.add_command(run.run)
cli.add_command(sweep.sweep)
cli.add_command(synth.synth)
cli.add_command(report.report)


def main() -> None:
    """Main entry point for the CLI."""
    try:
        cli(obj={})
    except Exception as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
