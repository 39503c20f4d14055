"""Recursive evidence aggregation: evidence field, window proposals, merging and top-k selection."""

from collections.abc import Callable, Sequence

import numpy as np
import structlog

from anomalens.config import ReaConfig
from anomalens.gateway.models import SegmentVerdict
from anomalens.lexicon import DEFAULT_LEXICON, Lexicon, count_cues, count_negations
from anomalens.models.intervals import EvidenceField, IntervalSet, Window

logger = structlog.get_logger(__name__)

WindowProbe = Callable[[Window], None]

# Gap used when merging the two halves inside the recursion.
RECURSION_MERGE_GAP = 1


class WindowBoundsError(IndexError):
    """Window indices outside the evidence field."""

    pass


def evidence_score(
    verdict: SegmentVerdict,
    lexicon: Lexicon,
    alpha: float,
    gamma: float,
    delta: float,
) -> float:
    """Flag plus weighted cue matches minus weighted negations, clipped to [0, 1]."""
    if not all(np.isfinite((alpha, gamma, delta))):
        raise ValueError("coefficients must be finite")
    raw = (
        alpha * verdict.flag
        + gamma * count_cues(verdict.explanation, lexicon)
        - delta * count_negations(verdict.explanation, lexicon)
    )
    return float(np.clip(raw, 0.0, 1.0))


def build_field(
    verdicts: Sequence[SegmentVerdict],
    config: ReaConfig,
    lexicon: Lexicon = DEFAULT_LEXICON,
) -> EvidenceField:
    alpha, gamma, delta = config.coefficients
    scores = tuple(evidence_score(v, lexicon, alpha, gamma, delta) for v in verdicts)
    return EvidenceField(scores=scores, alpha=alpha, gamma=gamma, delta=delta)


def window_stats(field: EvidenceField, l: int, r: int) -> Window:  # noqa: E741
    """Mean, peak and cumulative evidence over [l, r] inclusive."""
    if not 0 <= l <= r < len(field):
        raise WindowBoundsError(f"window [{l}, {r}] outside field of length {len(field)}")
    values = np.asarray(field.scores[l : r + 1], dtype=np.float64)
    return Window(
        l=l,
        r=r,
        mean=float(values.mean()),
        peak=float(values.max()),
        cumulative=float(values.sum()),
    )


def likely_anomalous(window: Window, peak_threshold: float, mean_threshold: float) -> bool:
    """A strong local peak or a sustained high mean."""
    return window.peak >= peak_threshold or window.mean >= mean_threshold


def merge_intervals(field: EvidenceField, intervals: Sequence[Window], gap: int) -> list[Window]:
    """
    Merge windows separated by at most ``gap`` empty segments.

    Overlapping windows always merge. Statistics of merged windows are
    recomputed from the field.
    """
    if gap < 0:
        raise ValueError("gap must be non-negative")
    if not intervals:
        return []

    ordered = sorted(intervals, key=lambda w: (w.l, w.r))
    spans: list[tuple[int, int]] = []
    start, end = ordered[0].l, ordered[0].r
    for window in ordered[1:]:
        if window.l - end - 1 <= gap:
            end = max(end, window.r)
        else:
            spans.append((start, end))
            start, end = window.l, window.r
    spans.append((start, end))

    return [window_stats(field, l, r) for l, r in spans]  # noqa: E741


def recurse_localize(
    field: EvidenceField,
    l: int,  # noqa: E741
    r: int,
    config: ReaConfig,
    depth: int = 0,
    probe: WindowProbe | None = None,
) -> list[Window]:
    """
    Recursively propose anomalous windows inside [l, r].

    A window failing the anomaly criteria yields nothing; a window at maximum
    depth or minimum length is returned whole; otherwise both halves are
    explored and their union merged with gap 1.

    Args:
        field: Evidence field
        l: First segment index
        r: Last segment index (inclusive)
        config: Thresholds, minimum length and maximum depth
        depth: Current recursion depth
        probe: Called with every evaluated window
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if l > r:
        return []

    window = window_stats(field, l, r)
    if probe is not None:
        probe(window)
    if not likely_anomalous(window, config.peak_threshold, config.mean_threshold):
        return []
    if depth >= config.max_depth or window.length <= config.min_window:
        return [window]

    mid = (l + r) // 2
    left = recurse_localize(field, l, mid, config, depth + 1, probe)
    right = recurse_localize(field, mid + 1, r, config, depth + 1, probe)
    return merge_intervals(field, left + right, RECURSION_MERGE_GAP)


def select_top_k(field: EvidenceField, candidates: Sequence[Window], k_max: int) -> IntervalSet:
    """Keep the ``k_max`` windows with the most cumulative evidence, returned in temporal order."""
    ranked = sorted(candidates, key=lambda w: (-w.cumulative, w.l, -w.length))
    kept = sorted(ranked[:k_max], key=lambda w: w.l)
    return IntervalSet(windows=kept, max_intervals=k_max)


def run_rea(
    verdicts: Sequence[SegmentVerdict],
    config: ReaConfig,
    lexicon: Lexicon = DEFAULT_LEXICON,
    probe: WindowProbe | None = None,
) -> tuple[EvidenceField, IntervalSet]:
    """
    Turn segment verdicts into an evidence field and a set of anomaly intervals.

    Pure: no model is called. The evidence field doubles as the final
    per-segment score.
    """
    if not verdicts:
        raise ValueError("verdicts must not be empty")

    field = build_field(verdicts, config, lexicon)
    candidates = recurse_localize(field, 0, len(field) - 1, config, probe=probe)
    merged = merge_intervals(field, candidates, config.merge_gap)
    intervals = select_top_k(field, merged, config.max_intervals)

    logger.debug(
        "Evidence aggregated",
        segments=len(field),
        candidates=len(candidates),
        merged=len(merged),
        selected=len(intervals),
    )
    return field, intervals


def flag_runs(verdicts: Sequence[SegmentVerdict]) -> list[tuple[int, int]]:
    """Maximal runs of flagged segments, before any aggregation."""
    runs: list[tuple[int, int]] = []
    start: int | None = None
    for position, verdict in enumerate(verdicts):
        if verdict.flag and start is None:
            start = position
        elif not verdict.flag and start is not None:
            runs.append((start, position - 1))
            start = None
    if start is not None:
        runs.append((start, len(verdicts) - 1))
    return runs
