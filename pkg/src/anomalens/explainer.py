"""Event-level explanations: representative segments, event frames and grounded narratives."""

import asyncio
import re
from collections.abc import Sequence

import structlog

from anomalens.config import PipelineConfig
from anomalens.gateway.base import GatewayError
from anomalens.gateway.client import ModelGateway
from anomalens.gateway.models import SegmentVerdict
from anomalens.ingest import FrameSource, IngestError, uniform_frame_indices
from anomalens.models.cea import Segment
from anomalens.models.events import (
    MAX_REPRESENTATIVES,
    EventExplanation,
    EvidenceItem,
    FrameSubstitution,
    RepresentativeSet,
    SelectionReason,
)
from anomalens.models.intervals import EvidenceField, IntervalSet, Window

logger = structlog.get_logger(__name__)

UNAVAILABLE_NARRATIVE = "<unavailable>"
SENTENCE_END = re.compile(r"[.!?]+(?:\s|$)")


def count_sentences(text: str) -> int:
    stripped = text.strip()
    if not stripped:
        return 0
    ends = len(SENTENCE_END.findall(stripped))
    return ends if stripped[-1] in ".!?" else ends + 1


def transition_segments(field: EvidenceField, interval: Window, threshold: float) -> list[int]:
    """Later index of every consecutive in-interval pair whose scores straddle the threshold."""
    scores = field.scores
    return [
        i + 1
        for i in range(interval.l, interval.r)
        if (scores[i] >= threshold) != (scores[i + 1] >= threshold)
    ]


def select_representatives(
    field: EvidenceField,
    verdicts: Sequence[SegmentVerdict],
    interval: Window,
    cap: int = MAX_REPRESENTATIVES,
    mean_threshold: float = 0.5,
) -> RepresentativeSet:
    """
    Pick the segments that describe an interval.

    Boundaries come first, then the highest-evidence segments (ties to the
    earlier index), then threshold transitions, until ``cap`` is reached.
    """
    if not 0 <= interval.l <= interval.r < len(field):
        raise ValueError(f"interval [{interval.l}, {interval.r}] outside the evidence field")
    if len(verdicts) != len(field):
        raise ValueError("verdicts and evidence field differ in length")
    if not 1 <= cap <= MAX_REPRESENTATIVES:
        raise ValueError(f"cap must lie in [1, {MAX_REPRESENTATIVES}]")

    boundaries = sorted({interval.l, interval.r})
    peaks = sorted(range(interval.l, interval.r + 1), key=lambda i: (-field.scores[i], i))
    transitions = transition_segments(field, interval, mean_threshold)

    chosen: list[int] = []
    for index in (*boundaries, *peaks, *transitions):
        if len(chosen) == cap:
            break
        if index not in chosen:
            chosen.append(index)

    transition_set = set(transitions)
    reasons: dict[int, SelectionReason] = {}
    for index in chosen:
        if index in boundaries:
            reasons[index] = SelectionReason.BOUNDARY
        elif index in transition_set:
            reasons[index] = SelectionReason.TRANSITION
        else:
            reasons[index] = SelectionReason.PEAK

    return RepresentativeSet(
        interval=interval, segment_indices=sorted(chosen), selection_reasons=reasons
    )


def interval_frame_range(segments: Sequence[Segment], interval: Window) -> tuple[int, int]:
    return segments[interval.l].frame_range[0], segments[interval.r].frame_range[1]


def _nearest_readable(source: FrameSource, index: int) -> tuple[int, bytes]:
    for distance in range(1, source.frame_count):
        for candidate in (index - distance, index + distance):
            if 0 <= candidate < source.frame_count:
                try:
                    return candidate, source.read(candidate)
                except IngestError:
                    continue
    raise IngestError(f"{source.video_id}: no readable frame near {index}")


def sample_event_frames(
    source: FrameSource,
    segments: Sequence[Segment],
    interval: Window,
    kappa: int,
) -> tuple[list[int], list[bytes], list[FrameSubstitution]]:
    """
    Sample ``kappa`` frames uniformly across the interval's frame span.

    Unreadable frames are replaced by the nearest readable frame and recorded.

    Returns:
        Frame indices used, their images, and any substitutions
    """
    first, last = interval_frame_range(segments, interval)
    indices: list[int] = []
    images: list[bytes] = []
    substitutions: list[FrameSubstitution] = []
    for index in uniform_frame_indices(first, last, kappa):
        try:
            image = source.read(index)
            used = index
        except IngestError:
            used, image = _nearest_readable(source, index)
            substitutions.append(FrameSubstitution(requested=index, used=used))
        indices.append(used)
        images.append(image)
    return indices, images, substitutions


async def explain_event(
    interval: Window,
    reps: RepresentativeSet,
    frames: list[bytes],
    frame_indices: list[int],
    verdicts: Sequence[SegmentVerdict],
    gateway: ModelGateway,
    substitutions: list[FrameSubstitution] | None = None,
) -> EventExplanation:
    """Caption one event from its frames and the representatives' explanations in order."""
    if not reps.segment_indices:
        raise ValueError("representative set must not be empty")

    evidence = [
        EvidenceItem(segment_index=i, explanation=verdicts[i].explanation)
        for i in reps.segment_indices
    ]
    log = logger.bind(interval=[interval.l, interval.r])
    error: str | None = None
    try:
        narrative = await gateway.caption_event(frames, [e.explanation for e in evidence])
        if not narrative:
            raise GatewayError("empty caption")
    except GatewayError as e:
        log.error("Event caption failed", error=str(e))
        narrative, error = UNAVAILABLE_NARRATIVE, str(e)

    return EventExplanation(
        interval=interval,
        narrative=narrative,
        evidence_used=evidence,
        frames_used=frame_indices,
        reasons=reps.selection_reasons,
        sentence_count=0 if error else count_sentences(narrative),
        substitutions=substitutions or [],
        error=error,
    )


async def explain_events(
    field: EvidenceField,
    verdicts: Sequence[SegmentVerdict],
    intervals: IntervalSet,
    segments: Sequence[Segment],
    source: FrameSource,
    gateway: ModelGateway,
    config: PipelineConfig,
) -> list[EventExplanation]:
    """One explanation per selected interval; captions run concurrently."""

    async def explain(interval: Window) -> EventExplanation:
        reps = select_representatives(
            field,
            verdicts,
            interval,
            cap=config.explainer.max_representatives,
            mean_threshold=config.rea.mean_threshold,
        )
        try:
            indices, images, substitutions = sample_event_frames(
                source, segments, interval, config.video.frames_per_segment
            )
        except IngestError as e:
            logger.error(
                "Event frames unavailable", interval=[interval.l, interval.r], error=str(e)
            )
            return EventExplanation(
                interval=interval,
                narrative=UNAVAILABLE_NARRATIVE,
                evidence_used=[
                    EvidenceItem(segment_index=i, explanation=verdicts[i].explanation)
                    for i in reps.segment_indices
                ],
                frames_used=[],
                reasons=reps.selection_reasons,
                error=str(e),
            )
        return await explain_event(
            interval, reps, images, indices, verdicts, gateway, substitutions
        )

    return list(await asyncio.gather(*(explain(w) for w in intervals.windows)))
