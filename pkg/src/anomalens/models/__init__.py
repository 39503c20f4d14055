"""Data models for anomalens."""

from anomalens.models.cea import (
    CeaResult,
    CeaTraceRecord,
    GateStats,
    HistoryBuffer,
    HistoryEntry,
    RefreshAttempt,
    RefreshOutcome,
    Segment,
    SummaryState,
)
from anomalens.models.evaluation import (
    AnnotationRecord,
    ExplanationVariant,
    FrameScoreTrack,
    JudgeResult,
)
from anomalens.models.events import EventExplanation, RepresentativeSet, SelectionReason
from anomalens.models.intervals import EvidenceField, IntervalSet, Window
from anomalens.models.run import RunArtifact, RunReport, StageTiming, VideoArtifact, VideoStatus

__all__ = [
    "AnnotationRecord",
    "CeaResult",
    "CeaTraceRecord",
    "EventExplanation",
    "EvidenceField",
    "ExplanationVariant",
    "FrameScoreTrack",
    "GateStats",
    "HistoryBuffer",
    "HistoryEntry",
    "IntervalSet",
    "JudgeResult",
    "RefreshAttempt",
    "RefreshOutcome",
    "RepresentativeSet",
    "RunArtifact",
    "RunReport",
    "Segment",
    "SelectionReason",
    "StageTiming",
    "SummaryState",
    "VideoArtifact",
    "VideoStatus",
    "Window",
]
