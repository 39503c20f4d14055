"""Models for context-aware segment scoring."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from anomalens.gateway.models import SegmentVerdict

NO_SUMMARY_TEXT = "No prior events observed yet"


class Segment(BaseModel):
    """A slice of source frames scored as one unit."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    frame_range: tuple[int, int]  # inclusive source frame indices
    frames: list[int]  # sampled frame indices, kappa of them
    center_frame: int

    @model_validator(mode="after")
    def _within_range(self) -> "Segment":
        first, last = self.frame_range
        if first < 0 or last < first:
            raise ValueError(f"invalid frame range {self.frame_range}")
        if not self.frames:
            raise ValueError("segment needs at least one sampled frame")
        if any(not first <= f <= last for f in self.frames):
            raise ValueError("sampled frames must lie inside frame_range")
        if not first <= self.center_frame <= last:
            raise ValueError("center_frame must lie inside frame_range")
        return self

    @property
    def frame_count(self) -> int:
        return self.frame_range[1] - self.frame_range[0] + 1


class HistoryEntry(BaseModel):
    """One remembered segment: its index, unit-norm embedding and center frame."""

    model_config = ConfigDict(frozen=True)

    segment_index: int = Field(ge=0)
    embedding: tuple[float, ...]
    center_frame: int


class HistoryBuffer(BaseModel):
    """Bounded FIFO of recent segment embeddings, ordered by segment index."""

    model_config = ConfigDict(frozen=True)

    capacity: int = Field(default=8, ge=1)
    entries: tuple[HistoryEntry, ...] = ()

    @model_validator(mode="after")
    def _bounded(self) -> "HistoryBuffer":
        if len(self.entries) > self.capacity:
            raise ValueError("history holds more entries than its capacity")
        indices = [e.segment_index for e in self.entries]
        if indices != sorted(indices):
            raise ValueError("history entries must be ordered by segment index")
        return self

    def __len__(self) -> int:
        return len(self.entries)


class GateStats(BaseModel):
    """Grounding statistics of a summary against a segment's frames."""

    similarities: list[float]
    mu: float = Field(ge=-1.0 - 1e-9, le=1.0 + 1e-9)
    entropy: float = Field(ge=0.0, le=1.0)
    temperature: float = Field(gt=0.0)
    top_k: int = Field(ge=1)


class SummaryState(BaseModel):
    """Current history summary and whether it may condition scoring."""

    text: str = NO_SUMMARY_TEXT
    last_refresh_segment: int | None = None
    accepted: bool = False
    stats: GateStats | None = None

    @model_validator(mode="after")
    def _accepted_has_stats(self) -> "SummaryState":
        if self.accepted and self.stats is None:
            raise ValueError("an accepted summary requires grounding stats")
        return self


class RefreshOutcome(str, Enum):
    """Result of one summary refresh attempt."""

    ACCEPTED = "accepted"
    GATE_REJECTED = "gate_rejected"
    VERDICT_WORDS = "verdict_words"  # summary judged normality itself
    UNGATED = "ungated"
    MODEL_ERROR = "model_error"


class RefreshAttempt(BaseModel):
    """Trace of one scheduled summary refresh."""

    segment_count: int = Field(ge=1)  # 1-based counter c
    segment_index: int = Field(ge=0)
    key_frame_segments: list[int] = Field(default_factory=list)
    summary: str | None = None
    stats: GateStats | None = None
    outcome: RefreshOutcome
    error: str | None = None


class CeaTraceRecord(BaseModel):
    """One line of the per-video scoring trace."""

    index: int
    flag: int
    explanation: str
    used_summary: bool
    mu: float | None = None
    entropy: float | None = None
    summary_digest: str | None = None
    refreshed: bool = False
    error: str | None = None


class SegmentError(BaseModel):
    """An isolated per-segment failure."""

    segment_index: int
    stage: str  # "embed" or "score"
    error: str


class CeaResult(BaseModel):
    """Output of context-aware scoring for one video."""

    verdicts: list[SegmentVerdict]
    trace: list[CeaTraceRecord]
    refreshes: list[RefreshAttempt] = Field(default_factory=list)
    errors: list[SegmentError] = Field(default_factory=list)

    @property
    def refresh_counts(self) -> list[int]:
        """Counter values c at which a refresh was attempted."""
        return [r.segment_count for r in self.refreshes]
