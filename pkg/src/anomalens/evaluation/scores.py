"""Frame-level score tracks: expansion, smoothing and event counting."""

from collections.abc import Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from anomalens.models.evaluation import FrameScoreTrack
from anomalens.models.intervals import EvidenceField

# Gaussian kernels are cut off at this many standard deviations.
KERNEL_TRUNCATE = 3.0


def _check_tiling(frame_ranges: Sequence[tuple[int, int]], total_frames: int) -> None:
    expected = 0
    for first, last in frame_ranges:
        if first != expected or last < first:
            raise ValueError(f"segment ranges must tile [0, {total_frames - 1}] in order")
        expected = last + 1
    if expected != total_frames:
        raise ValueError(f"segment ranges cover {expected} frames, expected {total_frames}")


def smooth(values: np.ndarray, sigma: float) -> np.ndarray:
    """
    Gaussian smoothing renormalised at the borders; sigma <= 0 is the identity.

    Dividing by the smoothed all-ones signal keeps constants constant near the edges.
    """
    if sigma <= 0:
        return values.astype(np.float64, copy=True)
    weights = gaussian_filter1d(
        np.ones_like(values, dtype=np.float64), sigma, mode="constant", truncate=KERNEL_TRUNCATE
    )
    filtered = gaussian_filter1d(
        values.astype(np.float64), sigma, mode="constant", truncate=KERNEL_TRUNCATE
    )
    return np.asarray(filtered / weights)


def expand_and_smooth(
    field: EvidenceField,
    frame_ranges: Sequence[tuple[int, int]],
    total_frames: int,
    sigma: float,
    video_id: str = "",
    labels: list[int] | None = None,
) -> FrameScoreTrack:
    """
    Give every frame its segment's evidence score, then smooth.

    Args:
        field: Per-segment evidence
        frame_ranges: Inclusive frame range of each segment, tiling [0, F-1]
        total_frames: Frame count F
        sigma: Gaussian standard deviation in frames
        video_id: Identifier carried on the track
        labels: Optional ground-truth frame labels
    """
    if len(frame_ranges) != len(field):
        raise ValueError("one frame range per segment is required")
    _check_tiling(frame_ranges, total_frames)

    lengths = [last - first + 1 for first, last in frame_ranges]
    step = np.repeat(np.asarray(field.scores, dtype=np.float64), lengths)
    scores = np.clip(smooth(step, sigma), 0.0, 1.0)
    return FrameScoreTrack(video_id=video_id, scores=scores.tolist(), labels=labels)


def count_events(track: FrameScoreTrack, threshold: float) -> int:
    """Number of maximal runs of frames scoring at or above the threshold."""
    above = np.asarray(track.scores) >= threshold
    if above.size == 0:
        return 0
    starts = above & ~np.concatenate(([False], above[:-1]))
    return int(starts.sum())
