"""Frame-level detection metrics pooled over videos."""

from collections.abc import Mapping, Sequence

import numpy as np
from sklearn.metrics import roc_auc_score

from anomalens.models.evaluation import AnnotationRecord, FrameScoreTrack


class UndefinedMetricError(ValueError):
    """The metric has no value for the given labels (e.g. a single class)."""

    pass


def pool_tracks(tracks: Sequence[FrameScoreTrack]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate scores and labels of labelled tracks, in order."""
    if any(t.labels is None for t in tracks):
        missing = [t.video_id for t in tracks if t.labels is None]
        raise ValueError(f"tracks without labels: {missing}")
    if not tracks:
        return np.zeros(0), np.zeros(0, dtype=int)
    scores = np.concatenate([np.asarray(t.scores, dtype=np.float64) for t in tracks])
    labels = np.concatenate([np.asarray(t.labels, dtype=int) for t in tracks])
    return scores, labels


def roc_auc(tracks: Sequence[FrameScoreTrack]) -> float:
    """Pooled frame-level ROC AUC; tied scores count one half."""
    scores, labels = pool_tracks(tracks)
    if len(np.unique(labels)) < 2:
        raise UndefinedMetricError("ROC AUC needs both normal and anomalous frames")
    return float(roc_auc_score(labels, scores))


def average_precision(tracks: Sequence[FrameScoreTrack]) -> float:
    """
    Pooled frame-level average precision.

    Frames are ranked by descending score with ties kept in their pooled order;
    AP is the mean of the precision at each positive's rank.
    """
    scores, labels = pool_tracks(tracks)
    positives = int(labels.sum())
    if positives == 0:
        raise UndefinedMetricError("average precision needs at least one anomalous frame")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    return float(np.sum((hits / ranks)[ranked == 1]) / positives)


def mean_iou(
    tracks: Sequence[FrameScoreTrack],
    annotations: Mapping[str, AnnotationRecord],
    threshold: float = 0.5,
) -> float:
    """
    Mean IoU of binarised predictions against ground truth, over abnormal videos.

    A video whose prediction and ground truth are both empty contributes 0, and so
    does a dataset without abnormal videos.
    """
    missing = [t.video_id for t in tracks if t.video_id not in annotations]
    if missing:
        raise ValueError(f"no annotation for videos: {missing}")

    ious = []
    for track in tracks:
        record = annotations[track.video_id]
        if not record.is_abnormal:
            continue
        gt = np.zeros(track.frame_count, dtype=bool)
        for start, end in record.anomalous_intervals:
            gt[start : end + 1] = True
        pred = np.asarray(track.scores) >= threshold
        union = int(np.sum(pred | gt))
        ious.append(int(np.sum(pred & gt)) / union if union else 0.0)

    if not ious:
        return 0.0
    return float(np.mean(ious))
