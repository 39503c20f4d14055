"""Tests for frame-level detection metrics."""

import random
from collections.abc import Callable

import pytest

from anomalens.evaluation.detection import (
    UndefinedMetricError,
    average_precision,
    mean_iou,
    pool_tracks,
    roc_auc,
)
from anomalens.models.evaluation import AnnotationRecord, FrameScoreTrack


def track(video_id: str, scores: list[float], labels: list[int] | None) -> FrameScoreTrack:
    return FrameScoreTrack(video_id=video_id, scores=scores, labels=labels)


def brute_auc(scores: list[float], labels: list[int]) -> float:
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def brute_ap(scores: list[float], labels: list[int]) -> float:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            total += hits / rank
    return total / sum(labels)


def random_tracks(rng: random.Random) -> list[FrameScoreTrack]:
    tracks = []
    for n in range(rng.randint(1, 3)):
        size = rng.randint(1, 30)
        tracks.append(
            track(
                f"v{n}",
                [round(rng.random(), 1) for _ in range(size)],
                [rng.randint(0, 1) for _ in range(size)],
            )
        )
    return tracks


class TestPooling:
    """Tests for pool_tracks."""

    def test_unlabelled(self) -> None:
        """Test that unlabelled tracks are refused."""
        with pytest.raises(ValueError):
            pool_tracks([track("a", [0.1], None)])

    def test_concatenates_in_order(self) -> None:
        """Test pooled order."""
        scores, labels = pool_tracks([track("a", [0.1, 0.2], [0, 1]), track("b", [0.3], [1])])

        assert scores.tolist() == [0.1, 0.2, 0.3]
        assert labels.tolist() == [0, 1, 1]


class TestRanking:
    """Tests for ROC AUC and average precision."""

    def test_against_brute_force(self) -> None:
        """Test random pooled tracks with many ties against pairwise and rank oracles."""
        rng = random.Random(99)
        checked = 0
        while checked < 300:
            tracks = random_tracks(rng)
            scores = [s for t in tracks for s in t.scores]
            labels = [y for t in tracks for y in t.labels or []]
            if len(set(labels)) < 2:
                continue
            checked += 1

            assert abs(roc_auc(tracks) - brute_auc(scores, labels)) <= 1e-9
            assert abs(average_precision(tracks) - brute_ap(scores, labels)) <= 1e-9

    def test_monotone_invariance(self) -> None:
        """Test that a strictly increasing rescaling leaves both metrics unchanged."""
        base = [track("a", [0.1, 0.4, 0.4, 0.9, 0.7, 0.2], [0, 1, 0, 1, 1, 0])]
        squared = [track("a", [s**2 for s in base[0].scores], base[0].labels)]

        assert roc_auc(squared) == pytest.approx(roc_auc(base))
        assert average_precision(squared) == pytest.approx(average_precision(base))

    @pytest.mark.parametrize(
        "rescale", [lambda x: x**3, lambda x: 0.5 + 0.5 * x], ids=["cube", "affine"]
    )
    def test_random_monotone_invariance(self, rescale: Callable[[float], float]) -> None:
        """Test that increasing rescalings of random pooled tracks leave both metrics unchanged."""
        rng = random.Random(5)
        checked = 0
        while checked < 200:
            tracks = random_tracks(rng)
            if len({y for t in tracks for y in t.labels or []}) < 2:
                continue
            checked += 1
            rescaled = [track(t.video_id, [rescale(s) for s in t.scores], t.labels) for t in tracks]

            assert abs(roc_auc(rescaled) - roc_auc(tracks)) <= 1e-9
            assert abs(average_precision(rescaled) - average_precision(tracks)) <= 1e-9

    def test_perfect_ranking(self) -> None:
        """Test a perfectly separated track."""
        perfect = [track("a", [0.9, 0.8, 0.1, 0.0], [1, 1, 0, 0])]

        assert roc_auc(perfect) == 1.0
        assert average_precision(perfect) == 1.0

    def test_single_class(self) -> None:
        """Test undefined metrics on single-class pools."""
        negatives = [track("a", [0.1, 0.5], [0, 0])]
        positives = [track("a", [0.1, 0.5], [1, 1])]

        with pytest.raises(UndefinedMetricError):
            roc_auc(negatives)
        with pytest.raises(UndefinedMetricError):
            average_precision(negatives)
        with pytest.raises(UndefinedMetricError):
            roc_auc(positives)
        assert average_precision(positives) == 1.0


class TestMeanIou:
    """Tests for mean IoU over abnormal videos."""

    def test_partial_overlap(self) -> None:
        """Test 5 shared frames out of a 15-frame union."""
        scores = [0.0] * 15 + [1.0] * 10 + [0.0] * 5
        annotations = {
            "a": AnnotationRecord(video_id="a", category="robbery", anomalous_intervals=[(10, 19)])
        }

        assert mean_iou([track("a", scores, None)], annotations) == pytest.approx(5 / 15)

    def test_normal_videos_are_skipped(self) -> None:
        """Test that only abnormal videos are averaged and an empty prediction scores 0."""
        annotations = {
            "a": AnnotationRecord(video_id="a", category="robbery", anomalous_intervals=[(0, 9)]),
            "b": AnnotationRecord(video_id="b", category="arson", anomalous_intervals=[(0, 4)]),
            "n": AnnotationRecord(video_id="n", category="normal"),
        }
        tracks = [
            track("a", [1.0] * 10, None),
            track("b", [0.0] * 10, None),
            track("n", [1.0] * 10, None),
        ]

        assert mean_iou(tracks, annotations) == pytest.approx(0.5)

    def test_missing_annotation(self) -> None:
        """Test that every scored video needs an annotation."""
        normal = {"n": AnnotationRecord(video_id="n", category="normal")}

        with pytest.raises(ValueError):
            mean_iou([track("x", [0.0], None)], normal)

    def test_no_abnormal_videos(self) -> None:
        """Test that a dataset of normal videos scores 0 instead of failing."""
        normal = {"n": AnnotationRecord(video_id="n", category="normal")}

        assert mean_iou([track("n", [1.0, 0.0], None)], normal) == 0.0
        assert mean_iou([], normal) == 0.0
