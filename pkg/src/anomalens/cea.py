"""Context-aware segment scoring: visual memory, key frames, summaries and the grounding gate."""

import math
import re
from collections.abc import Sequence

import numpy as np
import structlog
from scipy.special import entr, softmax

from anomalens.cache.base import sha256_hex
from anomalens.config import CeaConfig, PipelineConfig
from anomalens.gateway.base import GatewayError
from anomalens.gateway.client import ModelGateway
from anomalens.gateway.models import SegmentVerdict
from anomalens.ingest import FrameSource, IngestError
from anomalens.models.cea import (
    CeaResult,
    CeaTraceRecord,
    GateStats,
    HistoryBuffer,
    HistoryEntry,
    RefreshAttempt,
    RefreshOutcome,
    Segment,
    SegmentError,
    SummaryState,
)

logger = structlog.get_logger(__name__)

ERROR_EXPLANATION = "<error>"
# Hyphenated compounds such as "normal-looking" are not verdicts.
VERDICT_WORDS = re.compile(r"(?<![\w-])(normal|anomalous)(?![\w-])", re.IGNORECASE)


class NormalizationError(ValueError):
    """Embedding that cannot be scaled to unit length."""

    pass


def l2_normalize(vector: Sequence[float]) -> np.ndarray:
    """
    Scale a vector to unit L2 norm.

    Raises:
        NormalizationError: for zero, empty or non-finite vectors
    """
    arr = np.asarray(vector, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise NormalizationError("embedding must be a non-empty finite vector")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise NormalizationError("cannot normalize a zero vector")
    return arr / norm


def push_history(
    buffer: HistoryBuffer, segment: Segment, embedding: Sequence[float]
) -> HistoryBuffer:
    """Append the segment's normalized embedding, evicting the oldest entry beyond capacity."""
    entry = HistoryEntry(
        segment_index=segment.index,
        embedding=tuple(float(x) for x in l2_normalize(embedding)),
        center_frame=segment.center_frame,
    )
    entries = (*buffer.entries, entry)[-buffer.capacity :]
    return HistoryBuffer(capacity=buffer.capacity, entries=entries)


def select_key_frames(buffer: HistoryBuffer, k: int) -> list[HistoryEntry]:
    """
    Farthest-point sampling over the history embeddings.

    Seeded with the most recent entry; each further pick maximises the minimum
    Euclidean distance to the picks so far, ties going to the lowest segment
    index. The result is ordered by segment index.
    """
    if k < 1:
        raise ValueError("k must be positive")
    entries = buffer.entries
    if not entries:
        raise ValueError("buffer must not be empty")
    if len(entries) <= k:
        return list(entries)

    points = np.array([e.embedding for e in entries], dtype=np.float64)
    seed = len(entries) - 1
    selected = [seed]
    available = np.ones(len(entries), dtype=bool)
    available[seed] = False
    min_dist = np.linalg.norm(points - points[seed], axis=1)

    while len(selected) < k:
        # argmax returns the first maximum, i.e. the lowest segment index
        pick = int(np.argmax(np.where(available, min_dist, -np.inf)))
        selected.append(pick)
        available[pick] = False
        min_dist = np.minimum(min_dist, np.linalg.norm(points - points[pick], axis=1))

    return [entries[i] for i in sorted(selected)]


def grounding_stats(similarities: Sequence[float], temperature: float, top_k: int) -> GateStats:
    """
    Top-k mean similarity and normalized softmax entropy.

    With a single frame the entropy is defined as 0.
    """
    alpha = np.asarray(similarities, dtype=np.float64)
    if alpha.size == 0:
        raise ValueError("similarities must not be empty")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    kappa = alpha.size
    k = min(top_k, kappa)
    mu = float(np.mean(np.sort(alpha)[::-1][:k]))

    if kappa == 1:
        entropy = 0.0
    else:
        p = softmax(alpha / temperature)
        entropy = float(np.sum(entr(p)) / math.log(kappa))
        entropy = float(np.clip(entropy, 0.0, 1.0))

    return GateStats(
        similarities=[float(a) for a in alpha],
        mu=mu,
        entropy=entropy,
        temperature=temperature,
        top_k=k,
    )


async def compute_grounding(
    summary: str,
    frames: list[bytes],
    gateway: ModelGateway,
    temperature: float = 0.1,
    top_k: int = 4,
) -> GateStats:
    """Embed the summary and frames jointly and measure how well the text is grounded."""
    if not summary.strip():
        raise ValueError("summary must not be empty")
    vectors = await gateway.embed_joint([summary, *frames])
    text = l2_normalize(vectors[0])
    images = np.stack([l2_normalize(v) for v in vectors[1:]])
    similarities = np.clip(images @ text, -1.0, 1.0)
    return grounding_stats(similarities.tolist(), temperature, top_k)


def gate_decision(stats: GateStats, sim_threshold: float, ent_threshold: float) -> bool:
    """Accept iff mean similarity is strictly above and entropy strictly below their thresholds."""
    if not (0.0 <= sim_threshold <= 1.0 and 0.0 <= ent_threshold <= 1.0):
        raise ValueError("thresholds must lie in [0, 1]")
    return stats.mu > sim_threshold and stats.entropy < ent_threshold


def has_verdict_words(text: str) -> bool:
    """True when the summary itself judges normality."""
    return VERDICT_WORDS.search(text) is not None


def refresh_due(buffer: HistoryBuffer, segment_count: int, config: CeaConfig) -> bool:
    return len(buffer) >= config.min_history and segment_count % config.stride == 0


async def maybe_refresh_summary(
    state: SummaryState,
    buffer: HistoryBuffer,
    segment_count: int,
    config: CeaConfig,
    gateway: ModelGateway,
    source: FrameSource,
    frames: list[bytes],
) -> tuple[SummaryState, RefreshAttempt | None]:
    """
    Regenerate and gate the history summary when the schedule says so.

    Args:
        state: Current summary state
        buffer: History buffer, already updated with the current segment
        segment_count: 1-based segment counter
        config: Scoring parameters
        gateway: Model gateway
        source: Frame source used to load key frames
        frames: The current segment's sampled frames, used for grounding

    Returns:
        The new state and the attempt trace (None when no refresh was due)
    """
    if not refresh_due(buffer, segment_count, config):
        return state, None

    segment_index = buffer.entries[-1].segment_index
    log = logger.bind(segment=segment_index, segment_count=segment_count)
    key_entries = select_key_frames(buffer, config.key_frames)
    key_segments = [e.segment_index for e in key_entries]

    try:
        key_frames = [source.read(e.center_frame) for e in key_entries]
        summary = await gateway.summarize(key_frames)
        if config.mode == "gated" and has_verdict_words(summary):
            log.info("Summary refresh rejected for judging normality")
            new_state = SummaryState(
                text=summary, last_refresh_segment=segment_index, accepted=False
            )
            return new_state, RefreshAttempt(
                segment_count=segment_count,
                segment_index=segment_index,
                key_frame_segments=key_segments,
                summary=summary,
                outcome=RefreshOutcome.VERDICT_WORDS,
            )
        stats = await compute_grounding(
            summary, frames, gateway, config.temperature, config.top_k_mean
        )
    except (GatewayError, IngestError, NormalizationError, ValueError) as e:
        log.error("Summary refresh failed, keeping previous summary", error=str(e))
        return state.model_copy(update={"accepted": False}), RefreshAttempt(
            segment_count=segment_count,
            segment_index=segment_index,
            key_frame_segments=key_segments,
            outcome=RefreshOutcome.MODEL_ERROR,
            error=str(e),
        )

    if config.mode == "ungated":
        accepted, outcome = True, RefreshOutcome.UNGATED
    else:
        accepted = gate_decision(stats, config.sim_threshold, config.ent_threshold)
        outcome = RefreshOutcome.ACCEPTED if accepted else RefreshOutcome.GATE_REJECTED

    log.info(
        "Summary refreshed",
        outcome=outcome.value,
        mu=round(stats.mu, 4),
        entropy=round(stats.entropy, 4),
    )
    new_state = SummaryState(
        text=summary, last_refresh_segment=segment_index, accepted=accepted, stats=stats
    )
    return new_state, RefreshAttempt(
        segment_count=segment_count,
        segment_index=segment_index,
        key_frame_segments=key_segments,
        summary=summary,
        stats=stats,
        outcome=outcome,
    )


async def run_cea(
    segments: list[Segment],
    config: PipelineConfig,
    gateway: ModelGateway,
    source: FrameSource,
) -> CeaResult:
    """
    Score every segment of one video in order.

    The history is updated with each segment's center-frame embedding before
    the refresh check; a summary accepted at a refresh conditions every segment
    until the next refresh.
    """
    if not segments:
        raise ValueError("segments must not be empty")

    cea = config.cea
    buffer = HistoryBuffer(capacity=cea.history_capacity)
    state = SummaryState()
    verdicts: list[SegmentVerdict] = []
    trace: list[CeaTraceRecord] = []
    refreshes: list[RefreshAttempt] = []
    errors: list[SegmentError] = []

    for segment_count, segment in enumerate(segments, start=1):
        log = logger.bind(video_id=source.video_id, segment=segment.index)
        error: str | None = None

        try:
            center = source.read(segment.center_frame)
            buffer = push_history(buffer, segment, await gateway.embed_image(center))
        except (GatewayError, IngestError, NormalizationError) as e:
            log.error("History update failed", error=str(e))
            errors.append(SegmentError(segment_index=segment.index, stage="embed", error=str(e)))

        try:
            frames = [source.read(f) for f in segment.frames]
        except IngestError as e:
            frames = []
            error = str(e)

        attempt: RefreshAttempt | None = None
        if cea.mode != "none" and frames:
            state, attempt = await maybe_refresh_summary(
                state, buffer, segment_count, cea, gateway, source, frames
            )
            if attempt is not None:
                refreshes.append(attempt)

        summary = state.text if state.accepted else None
        verdict: SegmentVerdict | None = None
        if error is None:
            try:
                verdict = await gateway.score_segment(frames, summary, segment_index=segment.index)
            except GatewayError as e:
                error = str(e)
        if verdict is None:
            log.error("Segment scoring failed", error=error)
            errors.append(
                SegmentError(segment_index=segment.index, stage="score", error=error or "")
            )
            verdict = SegmentVerdict(
                segment_index=segment.index,
                flag=0,
                explanation=ERROR_EXPLANATION,
                used_summary=summary is not None,
                summary_snapshot=summary,
            )

        verdicts.append(verdict)
        trace.append(
            CeaTraceRecord(
                index=segment.index,
                flag=verdict.flag,
                explanation=verdict.explanation,
                used_summary=verdict.used_summary,
                mu=state.stats.mu if state.stats else None,
                entropy=state.stats.entropy if state.stats else None,
                summary_digest=sha256_hex(summary) if summary is not None else None,
                refreshed=attempt is not None,
                error=error,
            )
        )

    logger.info(
        "Context-aware scoring complete",
        video_id=source.video_id,
        segments=len(segments),
        flagged=sum(v.flag for v in verdicts),
        refreshes=len(refreshes),
        errors=len(errors),
    )
    return CeaResult(verdicts=verdicts, trace=trace, refreshes=refreshes, errors=errors)
