"""Report inspection command."""

from pathlib import Path

import click

from anomalens.artifacts import ArtifactError, read_report, report_summary
from anomalens_cli.utils import print_error, print_output


@click.command()
@click.option(
    "--in",
    "-i",
    "run_dir",
    required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Run output directory",
)
@click.option(
    "--videos",
    is_flag=True,
    help="Show per-video lines instead of the summary",
)
@click.pass_context
def report(ctx: click.Context, run_dir: Path, videos: bool) -> None:
    """Show the report of a finished run."""
    format: str = ctx.obj["format"]

    try:
        loaded = read_report(run_dir)
    except ArtifactError as e:
        print_error(f"Failed to read report: {e}")
        raise click.Abort()

    if videos:
        print_output(loaded.videos, format)
    else:
        print_output(report_summary(loaded), format)
