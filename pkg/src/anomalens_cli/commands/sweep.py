"""Parameter sweep command."""

import asyncio
from pathlib import Path
from typing import Optional

import click

from anomalens.config import ConfigError
from anomalens.evaluation.annotations import AnnotationError
from anomalens.ingest import IngestError, load_manifest
from anomalens.pipeline import load_grid, run_sweep
from anomalens_cli.utils import print_error, print_output, print_success, resolve_config


@click.command()
@click.option(
    "--grid",
    "-g",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="YAML mapping of dotted config paths to value lists",
)
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Base pipeline configuration YAML",
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
    help="Output directory; one run per cell plus grid.csv",
)
@click.pass_context
def sweep(
    ctx: click.Context,
    grid: Path,
    config_path: Optional[Path],
    manifest: Path,
    backend: Optional[str],
    out: Path,
) -> None:
    """Run the dataset once per cell of a parameter grid."""
    format: str = ctx.obj["format"]
    config = resolve_config(config_path, backend)

    try:
        axes = load_grid(grid)
        table = asyncio.run(run_sweep(config, load_manifest(manifest), axes, out))
    except ConfigError as e:
        print_error(f"Invalid grid: {e}")
        raise click.Abort()
    except (IngestError, AnnotationError) as e:
        print_error(f"Sweep failed: {e}")
        raise click.Abort()

    columns = ["cell", *axes, "auc", "ap", "miou", "events_per_video"]
    print_output(table[columns].to_dict(orient="records"), format)
    print_success(f"Wrote {out / 'grid.csv'}")
