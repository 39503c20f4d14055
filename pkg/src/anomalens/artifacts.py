"""Run artifacts on disk: report, frame scores, per-video traces, timings and metrics."""

import json
from pathlib import Path
from typing import Any

import pandas as pd
import structlog
from pydantic import ValidationError

from anomalens.models.run import RunArtifact, RunReport, VideoArtifact, VideoStatus

logger = structlog.get_logger(__name__)

REPORT_FILE = "report.json"
FRAME_SCORES_FILE = "frame_scores.csv"
TIMINGS_FILE = "timings.json"
METRICS_FILE = "metrics.prom"
TRACE_DIR = "traces"


class ArtifactError(Exception):
    """A run directory is missing or holds an unreadable report."""

    pass


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def frame_scores_frame(videos: list[VideoArtifact]) -> pd.DataFrame:
    """One row per (video, frame): score and label (empty when unlabelled)."""
    frames = []
    for video in videos:
        if video.track is None:
            continue
        track = video.track
        frames.append(
            pd.DataFrame(
                {
                    "video_id": track.video_id,
                    "frame": range(track.frame_count),
                    "score": track.scores,
                    "label": pd.array(
                        track.labels if track.labels is not None else [None] * track.frame_count,
                        dtype="Int64",
                    ),
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=["video_id", "frame", "score", "label"])
    return pd.concat(frames, ignore_index=True)


def write_video_traces(video: VideoArtifact, trace_dir: Path) -> None:
    """
    Write ``<id>.cea.jsonl`` (one scoring record per segment), ``<id>.rea.json``
    (evidence field and intervals) and ``<id>.events.json`` (explanations and judgements).
    """
    trace_dir.mkdir(parents=True, exist_ok=True)
    if video.cea is not None:
        lines = [json.dumps(r.model_dump(mode="json"), sort_keys=True) for r in video.cea.trace]
        (trace_dir / f"{video.video_id}.cea.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    if video.field is not None:
        rea = {
            "video_id": video.video_id,
            "field": video.field.model_dump(mode="json"),
            "intervals": (
                video.intervals.model_dump(mode="json") if video.intervals is not None else None
            ),
            "raw_flag_runs": video.raw_flag_runs,
            "refreshes": (
                [r.model_dump(mode="json") for r in video.cea.refreshes] if video.cea else []
            ),
        }
        (trace_dir / f"{video.video_id}.rea.json").write_text(_dump(rea), encoding="utf-8")
    if video.intervals is not None:
        events = {
            "video_id": video.video_id,
            "gold": video.gold,
            "events": [e.model_dump(mode="json") for e in video.events],
            "judge": [j.model_dump(mode="json") for j in video.judge],
        }
        (trace_dir / f"{video.video_id}.events.json").write_text(_dump(events), encoding="utf-8")


def write_run(
    artifact: RunArtifact, out_dir: Path, metrics_exposition: bytes | None = None
) -> None:
    """Persist a run. Everything except ``timings.json`` and ``metrics.prom`` is deterministic."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_FILE).write_text(
        _dump(artifact.report.model_dump(mode="json")), encoding="utf-8"
    )
    frame_scores_frame(artifact.videos).to_csv(out_dir / FRAME_SCORES_FILE, index=False)
    for video in artifact.videos:
        if video.status != VideoStatus.MISSING:
            write_video_traces(video, out_dir / TRACE_DIR)
    (out_dir / TIMINGS_FILE).write_text(
        _dump([t.model_dump(mode="json") for t in artifact.timings]), encoding="utf-8"
    )
    if metrics_exposition is not None:
        (out_dir / METRICS_FILE).write_bytes(metrics_exposition)
    logger.info("Wrote run artifacts", out=str(out_dir), videos=len(artifact.videos))


def read_report(run_dir: Path) -> RunReport:
    """Load ``report.json`` from a run directory."""
    path = run_dir / REPORT_FILE
    try:
        return RunReport.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise ArtifactError(f"{path}: {e.errors()[0]['msg']}") from e


def report_summary(report: RunReport) -> dict[str, Any]:
    """Headline numbers of a report, flattened for display."""
    summary: dict[str, Any] = {
        "auc": report.auc,
        "ap": report.ap,
        "miou": report.miou,
        "events_per_video": report.events_per_video,
        "raw_events_per_video": report.raw_events_per_video,
        "frame_events_per_video": report.frame_events_per_video,
        "videos": len(report.videos),
        "missing": len(report.missing_videos),
        "failed": len(report.failed_videos),
    }
    for variant, accuracy in report.judge_accuracy_by_variant.items():
        summary[f"judge_{variant}"] = accuracy
    for operation, calls in report.call_ledger.items():
        summary[f"calls_{operation}"] = calls
    return summary
