"""Ground-truth annotation loading: UCF-Crime temporal text files and a normalized JSON form."""

import json
from pathlib import Path
from typing import Any

import structlog
from pydantic import ValidationError

from anomalens.models.evaluation import AnnotationRecord

logger = structlog.get_logger(__name__)


class AnnotationError(ValueError):
    """Malformed annotation data or an annotation that does not fit its video."""

    pass


def intervals_from_labels(labels: list[int]) -> list[tuple[int, int]]:
    """Maximal runs of 1-labels as inclusive (start, end) pairs."""
    intervals: list[tuple[int, int]] = []
    start: int | None = None
    for i, label in enumerate(labels):
        if label and start is None:
            start = i
        elif not label and start is not None:
            intervals.append((start, i - 1))
            start = None
    if start is not None:
        intervals.append((start, len(labels) - 1))
    return intervals


def _record(data: dict[str, Any], where: str) -> AnnotationRecord:
    try:
        return AnnotationRecord.model_validate(data)
    except ValidationError as e:
        raise AnnotationError(f"{where}: {e.errors()[0]['msg']}") from e


def parse_ucf_annotations(text: str) -> dict[str, AnnotationRecord]:
    """
    Parse UCF-Crime temporal annotation lines.

    Each line reads ``<name> <class> <s1> <e1> <s2> <e2>``; -1 marks an absent
    interval and ends are inclusive. The video id is the file name without its
    extension.
    """
    records: dict[str, AnnotationRecord] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 2 or len(fields) % 2 != 0:
            raise AnnotationError(f"line {lineno}: expected '<name> <class> s1 e1 s2 e2'")
        try:
            bounds = [int(x) for x in fields[2:]]
        except ValueError as e:
            raise AnnotationError(f"line {lineno}: non-integer frame bound") from e

        intervals = [
            (bounds[i], bounds[i + 1])
            for i in range(0, len(bounds), 2)
            if bounds[i] != -1 and bounds[i + 1] != -1
        ]
        video_id = Path(fields[0]).stem
        records[video_id] = _record(
            {
                "video_id": video_id,
                "category": fields[1].lower(),
                "anomalous_intervals": sorted(intervals),
            },
            f"line {lineno}",
        )
    return records


def parse_json_annotations(data: Any) -> dict[str, AnnotationRecord]:
    """
    Parse the normalized JSON form.

    Accepts ``{"videos": [...]}`` or a bare list; each item carries ``video_id``,
    ``category`` and either ``intervals`` (inclusive pairs) or ``frame_labels``.
    Frame labels also fix the video's frame count.
    """
    items = data.get("videos") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise AnnotationError("expected a list of videos")

    records: dict[str, AnnotationRecord] = {}
    for n, item in enumerate(items):
        if not isinstance(item, dict) or "video_id" not in item:
            raise AnnotationError(f"videos[{n}]: missing video_id")
        video_id = str(item["video_id"])
        frame_labels = item.get("frame_labels")
        if frame_labels is not None:
            labels = [int(x) for x in frame_labels]
            intervals = intervals_from_labels(labels)
            total: int | None = len(labels)
        else:
            intervals = [(int(s), int(e)) for s, e in item.get("intervals", [])]
            total = item.get("total_frames")
        records[video_id] = _record(
            {
                "video_id": video_id,
                "category": str(item.get("category", "normal")).lower(),
                "anomalous_intervals": sorted(intervals),
                "total_frames": total,
            },
            f"videos[{n}] ({video_id})",
        )
    return records


def load_annotations(path: Path) -> dict[str, AnnotationRecord]:
    """Load annotations by file type: ``.json`` is the normalized form, anything else UCF text."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise AnnotationError(f"{path}: {e}") from e
    if path.suffix.lower() == ".json":
        try:
            records = parse_json_annotations(json.loads(text))
        except json.JSONDecodeError as e:
            raise AnnotationError(f"{path}: {e}") from e
    else:
        records = parse_ucf_annotations(text)
    logger.info("Loaded annotations", path=str(path), videos=len(records))
    return records


def dump_annotations(records: list[AnnotationRecord]) -> dict[str, Any]:
    """Normalized JSON form of a list of records."""
    return {
        "videos": [
            {
                "video_id": r.video_id,
                "category": r.category,
                "intervals": [list(i) for i in r.anomalous_intervals],
                "total_frames": r.total_frames,
            }
            for r in records
        ]
    }


def bind_annotation(record: AnnotationRecord, total_frames: int) -> AnnotationRecord:
    """
    Attach the ingested frame count to an annotation.

    Raises:
        AnnotationError: when an interval leaves [0, F-1] or a frame count disagrees
    """
    if record.total_frames is not None and record.total_frames != total_frames:
        raise AnnotationError(
            f"{record.video_id}: annotation covers {record.total_frames} frames, "
            f"video has {total_frames}"
        )
    data = record.model_dump()
    data["total_frames"] = total_frames
    return _record(data, record.video_id)
