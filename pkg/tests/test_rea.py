"""Tests for recursive evidence aggregation."""

import itertools
import random

import numpy as np
import pytest

from anomalens.config import ReaConfig
from anomalens.gateway.models import SegmentVerdict
from anomalens.lexicon import DEFAULT_LEXICON, Lexicon
from anomalens.models.intervals import EvidenceField, Window
from anomalens.rea import (
    WindowBoundsError,
    build_field,
    evidence_score,
    flag_runs,
    likely_anomalous,
    merge_intervals,
    recurse_localize,
    run_rea,
    select_top_k,
    window_stats,
)

NEUTRAL = "A person walks along the pavement."
CUES = ("fight", "gun", "knife")
NEGATIONS = ("no unusual", "no damage")


def verdict(index: int, flag: int, explanation: str = NEUTRAL) -> SegmentVerdict:
    return SegmentVerdict(segment_index=index, flag=flag, explanation=explanation)


def verdicts_for(flags: list[int]) -> list[SegmentVerdict]:
    return [verdict(i, f) for i, f in enumerate(flags)]


def field_of(scores: list[float]) -> EvidenceField:
    return EvidenceField(scores=tuple(scores))


def joined_score(flag: int, parts: list[str]) -> float:
    text = ". ".join(parts) or NEUTRAL
    return evidence_score(verdict(0, flag, text), DEFAULT_LEXICON, 0.9, 0.05, 0.25)


def span(field: EvidenceField, l: int, r: int) -> Window:  # noqa: E741
    return window_stats(field, l, r)


def oracle_stats(scores: list[float], l: int, r: int) -> tuple[float, float, float]:  # noqa: E741
    values = np.asarray(scores[l : r + 1], dtype=np.float64)
    return float(values.mean()), float(values.max()), float(values.sum())


def oracle_merge(spans: list[tuple[int, int]], gap: int) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for l, r in sorted(spans):  # noqa: E741
        if merged and l - merged[-1][1] - 1 <= gap:
            merged[-1][1] = max(merged[-1][1], r)
        else:
            merged.append([l, r])
    return [(l, r) for l, r in merged]  # noqa: E741


def oracle_recurse(
    scores: list[float], l: int, r: int, config: ReaConfig, depth: int  # noqa: E741
) -> list[tuple[int, int]]:
    """Literal recursion over plain tuples."""
    if l > r:
        return []
    mean, peak, _ = oracle_stats(scores, l, r)
    if not (peak >= config.peak_threshold or mean >= config.mean_threshold):
        return []
    if depth >= config.max_depth or r - l + 1 <= config.min_window:
        return [(l, r)]
    mid = (l + r) // 2
    halves = oracle_recurse(scores, l, mid, config, depth + 1) + oracle_recurse(
        scores, mid + 1, r, config, depth + 1
    )
    return oracle_merge(halves, 1)


def oracle_localize(scores: list[float], config: ReaConfig) -> list[tuple[int, int]]:
    merged = oracle_merge(oracle_recurse(scores, 0, len(scores) - 1, config, 0), config.merge_gap)
    ranked = sorted(
        merged, key=lambda s: (-oracle_stats(scores, s[0], s[1])[2], s[0], -(s[1] - s[0]))
    )
    return sorted(ranked[: config.max_intervals])


class TestEvidenceScore:
    """Tests for the per-segment evidence score."""

    def test_formula(self) -> None:
        """Test every combination of flag, cue count and negation count."""
        for flag, cues, negations in itertools.product((0, 1), range(4), range(3)):
            text = ". ".join([*CUES[:cues], *NEGATIONS[:negations]]) or NEUTRAL
            expected = min(1.0, max(0.0, 0.9 * flag + 0.05 * cues - 0.25 * negations))

            score = evidence_score(verdict(0, flag, text), DEFAULT_LEXICON, 0.9, 0.05, 0.25)

            assert score == pytest.approx(expected), (flag, cues, negations)

    def test_formula_exhaustive(self) -> None:
        """Test the clipped formula for every flag with up to ten cues and ten negations."""
        lexicon = Lexicon(
            cue_keywords=tuple(f"cue{i}" for i in range(10)),
            negation_patterns=tuple(rf"\bcalm{i}\b" for i in range(10)),
        ).compile()
        alpha, gamma, delta = ReaConfig().coefficients

        for flag, cues, negations in itertools.product((0, 1), range(11), range(11)):
            words = [f"cue{i}" for i in range(cues)] + [f"calm{i}" for i in range(negations)]
            text = " ".join(words) or NEUTRAL
            expected = min(1.0, max(0.0, alpha * flag + gamma * cues - delta * negations))

            score = evidence_score(verdict(0, flag, text), lexicon, alpha, gamma, delta)

            assert abs(score - expected) <= 1e-9, (flag, cues, negations)

    def test_monotone_in_cues_and_negations(self) -> None:
        """Test that a cue never lowers the score and a negation never raises it."""
        rng = random.Random(7)
        cue_words = ("gun", "knife", "blood", "arson", "crash", "panic", "scream", "theft")
        negation_words = ("no anomaly", "no unusual", "no damage")

        for _ in range(500):
            flag = rng.randint(0, 1)
            cues = rng.sample(cue_words, rng.randint(0, len(cue_words) - 1))
            negations = rng.sample(negation_words, rng.randint(0, len(negation_words) - 1))
            extra_cue = next(w for w in cue_words if w not in cues)
            extra_negation = next(w for w in negation_words if w not in negations)

            base = joined_score(flag, [*cues, *negations])
            assert joined_score(flag, [*cues, extra_cue, *negations]) >= base
            assert joined_score(flag, [*cues, *negations, extra_negation]) <= base

    def test_clipped(self) -> None:
        """Test both clipping bounds."""
        loud = verdict(0, 1, "fight gun knife stab")
        quiet = verdict(0, 0, "There is no anomaly and no damage.")

        assert evidence_score(loud, DEFAULT_LEXICON, 0.9, 0.05, 0.25) == 1.0
        assert evidence_score(quiet, DEFAULT_LEXICON, 0.9, 0.05, 0.25) == 0.0

    def test_non_finite_coefficients(self) -> None:
        """Test that NaN coefficients are rejected."""
        with pytest.raises(ValueError):
            evidence_score(verdict(0, 1), DEFAULT_LEXICON, float("nan"), 0.05, 0.25)

    def test_text_evidence_switch(self) -> None:
        """Test that disabling text evidence leaves only the flag term."""
        verdicts = [verdict(0, 0, "fight gun"), verdict(1, 1, "There is no anomaly.")]

        field = build_field(verdicts, ReaConfig(use_text_evidence=False))

        assert field.scores == (0.0, 0.9)
        assert (field.gamma, field.delta) == (0.0, 0.0)


class TestWindows:
    """Tests for window statistics, merging and selection."""

    def test_stats(self) -> None:
        """Test mean, peak and cumulative evidence."""
        window = span(field_of([0.0, 0.5, 1.0, 0.25]), 1, 3)

        assert (window.mean, window.peak, window.cumulative) == (
            pytest.approx(0.5833333333),
            1.0,
            1.75,
        )
        assert window.length == 3

    @pytest.mark.parametrize(("l", "r"), [(-1, 2), (2, 1), (0, 4)])
    def test_bounds(self, l: int, r: int) -> None:  # noqa: E741
        """Test windows outside the field."""
        with pytest.raises(WindowBoundsError):
            window_stats(field_of([0.0] * 4), l, r)

    def test_likely_anomalous(self) -> None:
        """Test the peak and mean criteria with inclusive thresholds."""
        field = field_of([0.8, 0.0, 0.5, 0.5, 0.79])

        assert likely_anomalous(span(field, 0, 1), 0.8, 0.5)
        assert likely_anomalous(span(field, 2, 3), 0.8, 0.5)
        assert not likely_anomalous(span(field, 3, 4), 0.8, 0.7)

    def test_merge(self) -> None:
        """Test gap-based merging and recomputed statistics."""
        field = field_of([1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0])
        windows = [span(field, 3, 4), span(field, 0, 1), span(field, 7, 7)]

        merged = merge_intervals(field, windows, 1)

        assert [w.bounds for w in merged] == [(0, 4), (7, 7)]
        assert merged[0].cumulative == 4.0
        assert [w.bounds for w in merge_intervals(field, windows, 0)] == [(0, 1), (3, 4), (7, 7)]
        assert [w.bounds for w in merge_intervals(field, windows, 2)] == [(0, 7)]

    def test_merge_properties(self) -> None:
        """Test idempotence, coverage and separation of merged windows on random inputs."""
        rng = random.Random(99)

        for _ in range(2_000):
            n = rng.randint(1, 40)
            field = field_of([round(rng.random(), 3) for _ in range(n)])
            gap = rng.randint(0, 3)
            windows = []
            for _ in range(rng.randint(1, 8)):
                l = rng.randrange(n)  # noqa: E741
                windows.append(span(field, l, rng.randint(l, n - 1)))

            merged = merge_intervals(field, windows, gap)

            assert [w.bounds for w in merge_intervals(field, merged, gap)] == [
                w.bounds for w in merged
            ]
            assert [w.bounds for w in merged] == oracle_merge([w.bounds for w in windows], gap)
            for before, after in zip(merged, merged[1:]):
                assert after.l - before.r - 1 > gap
            covered = {i for w in windows for i in range(w.l, w.r + 1)}
            assert covered <= {i for w in merged for i in range(w.l, w.r + 1)}
            for window in merged:
                mean, peak, total = oracle_stats(list(field.scores), window.l, window.r)
                assert abs(window.mean - mean) <= 1e-9
                assert abs(window.peak - peak) <= 1e-9
                assert abs(window.cumulative - total) <= 1e-9

    def test_merge_overlap_and_adjacency(self) -> None:
        """Test that overlapping and touching windows merge even with gap 0."""
        field = field_of([1.0] * 8)

        overlapping = merge_intervals(field, [span(field, 0, 3), span(field, 2, 5)], 0)
        touching = merge_intervals(field, [span(field, 0, 1), span(field, 2, 3)], 0)

        assert [w.bounds for w in overlapping] == [(0, 5)]
        assert [w.bounds for w in touching] == [(0, 3)]
        with pytest.raises(ValueError):
            merge_intervals(field, [], -1)

    def test_top_k(self) -> None:
        """Test selection by cumulative evidence and temporal output order."""
        field = field_of([1.0, 0.0, 1.0, 1.0, 0.0, 0.9, 0.0, 1.0])
        candidates = [span(field, 0, 0), span(field, 2, 3), span(field, 5, 5), span(field, 7, 7)]

        selected = select_top_k(field, candidates, 2)

        assert selected.bounds() == [(0, 0), (2, 3)]
        assert select_top_k(field, candidates, 6).bounds() == [(0, 0), (2, 3), (5, 5), (7, 7)]


class TestRecursion:
    """Tests for recursive localisation."""

    def test_aligned_event(self) -> None:
        """Test an event aligned with the bisection."""
        _, intervals = run_rea(verdicts_for([0, 0, 1, 1, 0, 0, 0, 0]), ReaConfig())

        assert intervals.bounds() == [(2, 3)]

    def test_single_segment(self) -> None:
        """Test a one-segment video."""
        field, intervals = run_rea(verdicts_for([1]), ReaConfig())

        assert field.scores == (0.9,)
        assert intervals.bounds() == [(0, 0)]

    def test_quiet_video(self) -> None:
        """Test that an all-normal video evaluates one window and proposes nothing."""
        probed: list[Window] = []

        _, intervals = run_rea(verdicts_for([0] * 20), ReaConfig(), probe=probed.append)

        assert len(intervals) == 0
        assert len(probed) == 1

    def test_max_depth_zero(self) -> None:
        """Test that depth zero returns the whole window."""
        field = field_of([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])

        windows = recurse_localize(field, 0, 5, ReaConfig(max_depth=0))

        assert [w.bounds for w in windows] == [(0, 5)]

    def test_evaluated_windows_are_linear(self) -> None:
        """Test that a saturated field evaluates fewer than 2n windows."""
        for n in (8, 33, 64, 257):
            probed: list[Window] = []

            recurse_localize(
                field_of([1.0] * n), 0, n - 1, ReaConfig(max_depth=20), probe=probed.append
            )

            assert len(probed) < 2 * n

    def test_negative_depth(self) -> None:
        """Test the depth precondition."""
        with pytest.raises(ValueError):
            recurse_localize(field_of([1.0]), 0, 0, ReaConfig(), depth=-1)

    def test_empty_verdicts(self) -> None:
        """Test the non-empty precondition."""
        with pytest.raises(ValueError):
            run_rea([], ReaConfig())

    def test_matches_oracle(self) -> None:
        """Test ten thousand random fields against the literal recursion."""
        rng = random.Random(1234)
        levels = (0.0, 0.05, 0.1, 0.45, 0.5, 0.55, 0.8, 0.9, 0.95, 1.0)

        for _ in range(10_000):
            n = rng.randint(1, 32)
            if rng.random() < 0.5:
                scores = [rng.choice(levels) for _ in range(n)]
            else:
                scores = [round(rng.random(), 3) for _ in range(n)]
            config = ReaConfig(
                min_window=rng.randint(1, 4),
                max_depth=rng.randint(0, 8),
                merge_gap=rng.randint(0, 2),
                max_intervals=rng.randint(1, 6),
            )
            field = field_of(scores)

            candidates = recurse_localize(field, 0, n - 1, config)
            merged = merge_intervals(field, candidates, config.merge_gap)
            selected = select_top_k(field, merged, config.max_intervals)

            assert selected.bounds() == oracle_localize(scores, config), (scores, config)


class TestFlagRuns:
    """Tests for raw flag runs."""

    def test_runs(self) -> None:
        """Test maximal runs including one at the end."""
        assert flag_runs(verdicts_for([1, 1, 0, 1, 0, 0, 1])) == [(0, 1), (3, 3), (6, 6)]
        assert flag_runs(verdicts_for([0, 0])) == []
