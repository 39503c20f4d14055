"""Dataset run command."""

import asyncio
from pathlib import Path
from typing import Optional

import click

from anomalens.artifacts import report_summary
from anomalens.evaluation.annotations import AnnotationError
from anomalens.ingest import IngestError, load_manifest
from anomalens.pipeline import run_pipeline
from anomalens_cli.utils import print_error, print_output, print_warning, resolve_config


@click.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Pipeline configuration YAML (defaults apply when omitted)",
)
@click.option(
    "--manifest",
    "-m",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Dataset manifest YAML",
)
@click.option(
    "--backend",
    "-b",
    type=click.Choice(["http", "scripted"]),
    help="Model backend (overrides gateway.backend)",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory for the run artifacts",
)
@click.pass_context
def run(
    ctx: click.Context,
    config_path: Optional[Path],
    manifest: Path,
    backend: Optional[str],
    out: Path,
) -> None:
    """Run the pipeline over every video of a manifest."""
    format: str = ctx.obj["format"]
    config = resolve_config(config_path, backend)

    try:
        artifact = asyncio.run(run_pipeline(config, load_manifest(manifest), out))
    except (IngestError, AnnotationError) as e:
        print_error(f"Run failed: {e}")
        raise click.Abort()

    report = artifact.report
    if report.missing_videos:
        print_warning(f"Missing videos: {', '.join(report.missing_videos)}")
    if report.failed_videos:
        print_warning(f"Failed videos: {', '.join(report.failed_videos)}")
    print_output(report_summary(report), format)
