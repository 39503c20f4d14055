"""Models for per-video results and dataset run reports."""

from enum import Enum
from typing import Any

from pydantic import BaseModel, Field

from anomalens.models.cea import CeaResult
from anomalens.models.evaluation import FrameScoreTrack, JudgeResult
from anomalens.models.events import EventExplanation
from anomalens.models.intervals import EvidenceField, IntervalSet


class VideoStatus(str, Enum):
    COMPLETED = "completed"
    FAILED = "failed"
    MISSING = "missing"


class StageTiming(BaseModel):
    """Wall-clock seconds spent in one stage of one video."""

    video_id: str
    stage: str
    seconds: float = Field(ge=0.0)


class VideoArtifact(BaseModel):
    """Everything produced for one video; partial when a stage failed."""

    video_id: str
    status: VideoStatus = VideoStatus.COMPLETED
    error: str | None = None
    failed_stage: str | None = None
    frame_count: int = 0
    segment_count: int = 0
    gold: str | None = None
    cea: CeaResult | None = None
    field: EvidenceField | None = None
    intervals: IntervalSet | None = None
    events: list[EventExplanation] = Field(default_factory=list)
    track: FrameScoreTrack | None = None
    raw_flag_runs: int = 0
    judge: list[JudgeResult] = Field(default_factory=list)
    timings: list[StageTiming] = Field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        """Compact per-video line for the report."""
        bounds = self.intervals.bounds() if self.intervals is not None else []
        return {
            "video_id": self.video_id,
            "status": self.status.value,
            "error": self.error,
            "failed_stage": self.failed_stage,
            "segments": self.segment_count,
            "intervals": [list(b) for b in bounds],
            "raw_flag_runs": self.raw_flag_runs,
            "refreshes": self.cea.refresh_counts if self.cea else [],
            "segment_errors": len(self.cea.errors) if self.cea else 0,
        }


class RunReport(BaseModel):
    """Dataset-level metrics and bookkeeping written to report.json."""

    auc: float | None = None
    ap: float | None = None
    miou: float | None = None
    undefined_metrics: dict[str, str] = Field(default_factory=dict)
    events_per_video: float | None = None
    raw_events_per_video: float | None = None
    frame_events_per_video: float | None = None
    judge_accuracy_by_variant: dict[str, float] = Field(default_factory=dict)
    judge_token_length_by_variant: dict[str, float] = Field(default_factory=dict)
    videos: list[dict[str, Any]] = Field(default_factory=list)
    missing_videos: list[str] = Field(default_factory=list)
    failed_videos: list[str] = Field(default_factory=list)
    call_ledger: dict[str, int] = Field(default_factory=dict)
    role_ledger: dict[str, int] = Field(default_factory=dict)
    cache_digests: dict[str, str] = Field(default_factory=dict)
    config: dict[str, Any] = Field(default_factory=dict)


class RunArtifact(BaseModel):
    """A complete dataset run: the report plus every per-video artifact."""

    report: RunReport
    videos: list[VideoArtifact] = Field(default_factory=list)

    def video(self, video_id: str) -> VideoArtifact:
        for artifact in self.videos:
            if artifact.video_id == video_id:
                return artifact
        raise KeyError(video_id)

    @property
    def timings(self) -> list[StageTiming]:
        return [t for v in self.videos for t in v.timings]
