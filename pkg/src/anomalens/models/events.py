"""Models for event-level explanations."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator

from anomalens.models.intervals import Window

MAX_REPRESENTATIVES = 10


class SelectionReason(str, Enum):
    """Why a segment represents its event."""

    BOUNDARY = "boundary"
    PEAK = "peak"
    TRANSITION = "transition"


class RepresentativeSet(BaseModel):
    """Segments chosen to describe one interval, sorted ascending."""

    interval: Window
    segment_indices: list[int]
    selection_reasons: dict[int, SelectionReason]

    @model_validator(mode="after")
    def _inside_interval(self) -> "RepresentativeSet":
        if len(self.segment_indices) > MAX_REPRESENTATIVES:
            raise ValueError(f"at most {MAX_REPRESENTATIVES} representatives")
        if self.segment_indices != sorted(set(self.segment_indices)):
            raise ValueError("representatives must be unique and ascending")
        if any(not self.interval.l <= i <= self.interval.r for i in self.segment_indices):
            raise ValueError("representatives must lie inside the interval")
        if set(self.selection_reasons) != set(self.segment_indices):
            raise ValueError("every representative needs exactly one selection reason")
        return self


class EvidenceItem(BaseModel):
    """A stored segment explanation used as caption evidence."""

    segment_index: int
    explanation: str


class FrameSubstitution(BaseModel):
    """An unreadable frame replaced by its nearest readable neighbour."""

    requested: int
    used: int


class EventExplanation(BaseModel):
    """One narrative per selected interval, with full provenance."""

    interval: Window
    narrative: str = Field(min_length=1)
    evidence_used: list[EvidenceItem]
    frames_used: list[int]
    reasons: dict[int, SelectionReason] = Field(default_factory=dict)
    sentence_count: int = 0
    substitutions: list[FrameSubstitution] = Field(default_factory=list)
    error: str | None = None
