"""Models for frame-level scoring, ground truth and judged explanations."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator


class FrameScoreTrack(BaseModel):
    """Per-frame anomaly scores of one video, with optional ground-truth labels."""

    video_id: str
    scores: list[float]
    labels: list[int] | None = None

    @model_validator(mode="after")
    def _aligned(self) -> "FrameScoreTrack":
        if any(not 0.0 <= s <= 1.0 for s in self.scores):
            raise ValueError("frame scores must lie in [0, 1]")
        if self.labels is not None:
            if len(self.labels) != len(self.scores):
                raise ValueError(
                    f"{self.video_id}: {len(self.labels)} labels for {len(self.scores)} frames"
                )
            if any(label not in (0, 1) for label in self.labels):
                raise ValueError("frame labels must be 0 or 1")
        return self

    @property
    def frame_count(self) -> int:
        return len(self.scores)


class AnnotationRecord(BaseModel):
    """Ground truth of one video: category and inclusive anomalous frame intervals."""

    video_id: str
    category: str
    anomalous_intervals: list[tuple[int, int]] = Field(default_factory=list)
    total_frames: int | None = None  # set once bound to the ingested video

    @model_validator(mode="after")
    def _well_formed(self) -> "AnnotationRecord":
        previous_end = -1
        for start, end in self.anomalous_intervals:
            if start < 0 or end < start:
                raise ValueError(f"{self.video_id}: invalid interval [{start}, {end}]")
            if start <= previous_end:
                raise ValueError(f"{self.video_id}: intervals must be sorted and disjoint")
            if self.total_frames is not None and end > self.total_frames - 1:
                raise ValueError(
                    f"{self.video_id}: interval [{start}, {end}] exceeds "
                    f"{self.total_frames} frames"
                )
            previous_end = end
        return self

    @property
    def is_abnormal(self) -> bool:
        return bool(self.anomalous_intervals)

    def frame_labels(self) -> list[int]:
        """Per-frame 0/1 labels; requires a bound frame count."""
        if self.total_frames is None:
            raise ValueError(f"{self.video_id}: annotation is not bound to a frame count")
        labels = [0] * self.total_frames
        for start, end in self.anomalous_intervals:
            labels[start : end + 1] = [1] * (end - start + 1)
        return labels


class ExplanationVariant(str, Enum):
    """Kinds of explanation text shown to the category judge."""

    EVENT_LEVEL = "event_level"
    PEAK_SEGMENT = "peak_segment"
    RANDOM_SEGMENT = "random_segment"
    CONCATENATED = "concatenated"


class JudgeResult(BaseModel):
    """Judge verdict for one explanation variant of one event."""

    video_id: str
    event_index: int = 0
    explanation_variant: ExplanationVariant
    explanation: str
    predicted: str
    gold: str
    correct: bool
