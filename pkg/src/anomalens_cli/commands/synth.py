"""Synthetic dataset generation command."""

from pathlib import Path

import click

from anomalens.synthetic import (
    ScenarioError,
    generate_scenario,
    load_scenario_set,
    write_dataset,
)
from anomalens_cli.utils import print_error, print_output, print_success


@click.command()
@click.option(
    "--spec",
    "-s",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="YAML scenario spec (segment_len plus a list of videos)",
)
@click.option(
    "--out",
    "-o",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory for frames, scenarios, annotations and manifest",
)
@click.pass_context
def synth(ctx: click.Context, spec: Path, out: Path) -> None:
    """Generate an offline dataset for the scripted backend."""
    format: str = ctx.obj["format"]

    try:
        scenario_set = load_scenario_set(spec)
        generated = [generate_scenario(v, scenario_set.segment_len) for v in scenario_set.videos]
        manifest = write_dataset(generated, out)
    except ScenarioError as e:
        print_error(f"Failed to generate scenarios: {e}")
        raise click.Abort()

    print_output(
        [
            {
                "video_id": g.video_id,
                "segments": g.spec.segments,
                "events": len(g.spec.events),
                "noise_spikes": len(g.noise_spikes),
                "frames": g.frame_count,
            }
            for g in generated
        ],
        format,
    )
    print_success(f"Wrote {manifest}")
