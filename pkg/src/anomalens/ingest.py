"""Video ingestion: frame sources, segmentation and dataset manifests."""

from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np
import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from anomalens.config import PipelineConfig
from anomalens.evaluation.annotations import AnnotationError, bind_annotation
from anomalens.models.cea import Segment
from anomalens.models.evaluation import AnnotationRecord

logger = structlog.get_logger(__name__)

FRAME_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class IngestError(Exception):
    """Unreadable frames, an empty video or an annotation that does not fit it."""

    pass


class FrameSource(ABC):
    """Random access to the encoded frames of one video."""

    @property
    @abstractmethod
    def video_id(self) -> str:
        pass

    @property
    @abstractmethod
    def frame_count(self) -> int:
        pass

    @abstractmethod
    def read(self, index: int) -> bytes:
        """
        Encoded image bytes of one frame.

        Raises:
            IngestError: when the frame cannot be read
        """
        pass


class DirectoryFrameSource(FrameSource):
    """Pre-extracted frames, one image file per frame, ordered by file name."""

    def __init__(self, directory: Path, video_id: str | None = None) -> None:
        if not directory.is_dir():
            raise IngestError(f"frame directory not found: {directory}")
        self._directory = directory
        self._video_id = video_id or directory.name
        self._paths = sorted(
            p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES
        )

    @property
    def video_id(self) -> str:
        return self._video_id

    @property
    def frame_count(self) -> int:
        return len(self._paths)

    def read(self, index: int) -> bytes:
        if not 0 <= index < len(self._paths):
            raise IngestError(f"{self._video_id}: frame {index} out of range")
        try:
            return self._paths[index].read_bytes()
        except OSError as e:
            raise IngestError(f"{self._video_id}: cannot read frame {index}: {e}") from e


class InMemoryFrameSource(FrameSource):
    """Frames held in memory; used for tests and generated scenarios."""

    def __init__(self, video_id: str, frames: list[bytes]) -> None:
        self._video_id = video_id
        self._frames = frames

    @property
    def video_id(self) -> str:
        return self._video_id

    @property
    def frame_count(self) -> int:
        return len(self._frames)

    def read(self, index: int) -> bytes:
        if not 0 <= index < len(self._frames):
            raise IngestError(f"{self._video_id}: frame {index} out of range")
        return self._frames[index]


def uniform_frame_indices(first: int, last: int, count: int) -> list[int]:
    """
    ``count`` indices spread uniformly over [first, last], endpoints included.

    Positions are rounded half up, so short ranges repeat indices.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if last < first:
        raise ValueError("last must not precede first")
    if count == 1:
        return [first + (last - first) // 2]
    positions = np.floor(np.linspace(first, last, count) + 0.5).astype(int)
    return [int(p) for p in positions]


def segment_frames(frame_count: int, segment_len: int, frames_per_segment: int) -> list[Segment]:
    """Split F frames into consecutive segments; the last one may be short."""
    if frame_count < 1:
        raise IngestError("video has no frames")
    segments = []
    for index, first in enumerate(range(0, frame_count, segment_len)):
        last = min(first + segment_len, frame_count) - 1
        frames = uniform_frame_indices(first, last, frames_per_segment)
        segments.append(
            Segment(
                index=index,
                frame_range=(first, last),
                frames=frames,
                center_frame=frames[frames_per_segment // 2],
            )
        )
    return segments


def ingest_video(
    source: FrameSource,
    config: PipelineConfig,
    annotation: AnnotationRecord | None = None,
) -> tuple[list[Segment], AnnotationRecord | None]:
    """
    Segment a video and bind its annotation to the frame count.

    Raises:
        IngestError: for an empty video or an annotation outside [0, F-1]
    """
    if source.frame_count < 1:
        raise IngestError(f"{source.video_id}: video has no frames")
    segments = segment_frames(
        source.frame_count, config.video.segment_len, config.video.frames_per_segment
    )
    bound = None
    if annotation is not None:
        try:
            bound = bind_annotation(annotation, source.frame_count)
        except AnnotationError as e:
            raise IngestError(f"annotation does not fit video {source.video_id}: {e}") from e
    logger.debug(
        "Ingested video",
        video_id=source.video_id,
        frames=source.frame_count,
        segments=len(segments),
    )
    return segments, bound


class VideoEntry(BaseModel):
    """One manifest line."""

    model_config = ConfigDict(extra="forbid")

    id: str
    frames: Path
    scenario: Path | None = None  # scripted replies for offline runs


class Manifest(BaseModel):
    """Dataset manifest: videos plus an optional annotation file."""

    model_config = ConfigDict(extra="forbid")

    videos: list[VideoEntry] = Field(default_factory=list)
    annotations: Path | None = None


def load_manifest(path: Path) -> Manifest:
    """
    Load a YAML manifest; relative paths resolve against the manifest's directory.

    Raises:
        IngestError: for unreadable or invalid manifests
    """
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        manifest = Manifest.model_validate(data)
    except (OSError, yaml.YAMLError) as e:
        raise IngestError(f"{path}: {e}") from e
    except ValidationError as e:
        raise IngestError(f"{path}: {e.errors()[0]['msg']}") from e

    base = path.parent

    def resolve(p: Path) -> Path:
        return p if p.is_absolute() else base / p

    return Manifest(
        videos=[
            VideoEntry(
                id=v.id,
                frames=resolve(v.frames),
                scenario=resolve(v.scenario) if v.scenario else None,
            )
            for v in manifest.videos
        ],
        annotations=resolve(manifest.annotations) if manifest.annotations else None,
    )
