"""Tests for context-aware scoring."""

import random
from collections.abc import Callable

import numpy as np
import pytest

from anomalens.cea import (
    ERROR_EXPLANATION,
    NormalizationError,
    compute_grounding,
    gate_decision,
    grounding_stats,
    has_verdict_words,
    l2_normalize,
    push_history,
    refresh_due,
    run_cea,
    select_key_frames,
)
from anomalens.cache import MemoryResponseCache
from anomalens.config import CeaConfig, PipelineConfig, override_config
from anomalens.gateway.client import ModelGateway, build_gateway
from anomalens.gateway.scripted import ScriptedBackend, ScriptedScenario, ScriptedVerdict
from anomalens.ingest import InMemoryFrameSource, segment_frames
from anomalens.models.cea import GateStats, HistoryBuffer, HistoryEntry, RefreshOutcome, Segment
from anomalens.synthetic import SyntheticFrameSource, render_frame
from anomalens.telemetry import GatewayMetrics

GatewayFactory = Callable[..., ModelGateway]


def unit(dim: int, *hot: int) -> list[float]:
    vector = [0.0] * dim
    for i in hot:
        vector[i] = 1.0
    return vector


def buffer_of(embeddings: list[list[float]]) -> HistoryBuffer:
    entries = tuple(
        HistoryEntry(segment_index=i, embedding=tuple(e), center_frame=i * 16 + 8)
        for i, e in enumerate(embeddings)
    )
    return HistoryBuffer(capacity=max(8, len(entries)), entries=entries)


def brute_force_fps(points: np.ndarray, k: int) -> list[int]:
    """Step-by-step greedy maximin with explicit loops."""
    n = len(points)
    if n <= k:
        return list(range(n))
    chosen = [n - 1]
    while len(chosen) < k:
        best, best_score = -1, -1.0
        for candidate in range(n):
            if candidate in chosen:
                continue
            score = min(float(np.linalg.norm(points[candidate] - points[c])) for c in chosen)
            if score > best_score:
                best, best_score = candidate, score
        chosen.append(best)
    return sorted(chosen)


def verdicts(n: int, flag: int = 0) -> list[ScriptedVerdict]:
    return [
        ScriptedVerdict(flag=flag, explanation=f"Segment {i} shows a street.") for i in range(n)
    ]


def gate_stats(mu: float, entropy: float) -> GateStats:
    return GateStats(similarities=[mu], mu=mu, entropy=entropy, temperature=0.1, top_k=4)


class TestHistory:
    """Tests for the history buffer and normalisation."""

    def test_normalize(self) -> None:
        """Test unit scaling."""
        assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])

    @pytest.mark.parametrize("vector", [[0.0, 0.0], [], [1.0, float("nan")]])
    def test_normalize_rejects(self, vector: list[float]) -> None:
        """Test zero, empty and non-finite vectors."""
        with pytest.raises(NormalizationError):
            l2_normalize(vector)

    def test_eviction(self) -> None:
        """Test that the oldest entries are evicted beyond capacity."""
        buffer = HistoryBuffer(capacity=3)
        for i in range(5):
            first = i * 16
            segment = Segment(
                index=i, frame_range=(first, first + 15), frames=[first], center_frame=first
            )
            buffer = push_history(buffer, segment, [1.0, float(i)])

        assert [e.segment_index for e in buffer.entries] == [2, 3, 4]
        assert all(np.isclose(np.linalg.norm(e.embedding), 1.0) for e in buffer.entries)


class TestSelectKeyFrames:
    """Tests for farthest-point key-frame selection."""

    def test_matches_brute_force(self) -> None:
        """Test the greedy trace against an explicit verifier on all buffer sizes up to 8."""
        rng = np.random.default_rng(7)
        for size in range(1, 9):
            for k in range(1, 6):
                for _ in range(20):
                    points = rng.standard_normal((size, 6))
                    points /= np.linalg.norm(points, axis=1, keepdims=True)
                    selected = select_key_frames(buffer_of(points.tolist()), k)

                    assert [e.segment_index for e in selected] == brute_force_fps(points, k)

    def test_small_buffer_returns_all(self) -> None:
        """Test that a buffer no larger than k is returned whole."""
        buffer = buffer_of([unit(4, 0), unit(4, 1)])

        assert [e.segment_index for e in select_key_frames(buffer, 4)] == [0, 1]

    def test_ties_go_to_lowest_index(self) -> None:
        """Test tie-breaking on identical embeddings."""
        buffer = buffer_of([unit(4, 0)] * 5)

        assert [e.segment_index for e in select_key_frames(buffer, 3)] == [0, 1, 4]

    def test_prefers_distant_points(self) -> None:
        """Test that the pick is the point farthest from the most recent one."""
        buffer = buffer_of([unit(3, 1), unit(3, 0), [0.9, 0.1, 0.0], unit(3, 0)])

        assert [e.segment_index for e in select_key_frames(buffer, 2)] == [0, 3]

    def test_invalid_arguments(self) -> None:
        """Test k and emptiness preconditions."""
        with pytest.raises(ValueError):
            select_key_frames(buffer_of([unit(2, 0)]), 0)
        with pytest.raises(ValueError):
            select_key_frames(HistoryBuffer(), 2)


class TestGrounding:
    """Tests for grounding statistics and the gate."""

    def test_uniform_similarities(self) -> None:
        """Test that equal similarities give entropy one."""
        stats = grounding_stats([0.4] * 8, temperature=0.1, top_k=4)

        assert stats.entropy == pytest.approx(1.0, abs=1e-9)
        assert stats.mu == pytest.approx(0.4)

    def test_spike(self) -> None:
        """Test that one dominant frame gives near-zero entropy."""
        stats = grounding_stats([1.0] + [0.0] * 7, temperature=0.1, top_k=4)

        assert stats.entropy <= 0.01
        assert stats.mu == pytest.approx(0.25)

    def test_top_k_mean(self) -> None:
        """Test the top-k mean similarity."""
        stats = grounding_stats([0.1, 0.9, 0.6, 0.8, 0.7, 0.0, 0.2, 0.3], 0.1, 4)

        assert stats.mu == pytest.approx(0.75)

    def test_single_frame(self) -> None:
        """Test that a single frame has zero entropy."""
        assert grounding_stats([0.5], 0.1, 4).entropy == 0.0

    def test_invalid(self) -> None:
        """Test empty input and non-positive temperature."""
        with pytest.raises(ValueError):
            grounding_stats([], 0.1, 4)
        with pytest.raises(ValueError):
            grounding_stats([0.1], 0.0, 4)

    @pytest.mark.parametrize(
        ("mu", "entropy", "accepted"),
        [
            (0.31, 0.79, True),
            (0.30, 0.79, False),
            (0.31, 0.80, False),
            (0.29, 0.81, False),
            (0.31, 0.81, False),
            (0.29, 0.79, False),
        ],
    )
    def test_gate_truth_table(self, mu: float, entropy: float, accepted: bool) -> None:
        """Test strict inequalities at the default thresholds."""
        assert gate_decision(gate_stats(mu, entropy), 0.30, 0.80) is accepted

    def test_gate_threshold_range(self) -> None:
        """Test that thresholds outside [0, 1] are rejected."""
        with pytest.raises(ValueError):
            gate_decision(gate_stats(0.5, 0.5), 1.2, 0.8)

    def test_statistics_match_brute_force(self) -> None:
        """Test bounds of both statistics and agreement with a direct computation."""
        rng = np.random.default_rng(3)

        for _ in range(1_000):
            kappa = int(rng.integers(1, 17))
            similarities = rng.uniform(-1.0, 1.0, size=kappa)
            temperature = float(rng.uniform(0.01, 2.0))
            top_k = int(rng.integers(1, 9))

            stats = grounding_stats(similarities.tolist(), temperature, top_k)

            assert 0.0 <= stats.entropy <= 1.0
            assert similarities.min() - 1e-9 <= stats.mu <= similarities.max() + 1e-9
            expected_mu = float(np.mean(sorted(similarities, reverse=True)[:top_k]))
            assert abs(stats.mu - expected_mu) <= 1e-9
            if kappa > 1:
                logits = (similarities - similarities.max()) / temperature
                p = np.exp(logits) / np.exp(logits).sum()
                expected = float(-(p * np.log(p)).sum() / np.log(kappa))
                assert abs(stats.entropy - min(1.0, max(0.0, expected))) <= 1e-9

    def test_gate_is_monotone(self) -> None:
        """Test that more similarity, less entropy or looser thresholds never reject a pass."""
        rng = random.Random(11)

        for _ in range(2_000):
            mu, entropy = rng.random(), rng.random()
            sim_threshold, ent_threshold = rng.random(), rng.random()
            accepted = gate_decision(gate_stats(mu, entropy), sim_threshold, ent_threshold)
            if not accepted:
                continue

            higher_mu = min(1.0, mu + rng.random() * 0.5)
            lower_entropy = max(0.0, entropy - rng.random() * 0.5)
            assert gate_decision(gate_stats(higher_mu, entropy), sim_threshold, ent_threshold)
            assert gate_decision(gate_stats(mu, lower_entropy), sim_threshold, ent_threshold)
            assert gate_decision(
                gate_stats(mu, entropy),
                sim_threshold * rng.random(),
                ent_threshold + (1.0 - ent_threshold) * rng.random(),
            )

    @pytest.mark.parametrize(
        ("text", "expected"),
        [
            ("Everything looks normal.", True),
            ("An ANOMALOUS crowd gathers.", True),
            ("People behave abnormally.", False),
            ("- two people cross the street", False),
            ("- a normal-looking street with parked cars", False),
            ("- traffic is normal.", True),
            ("- an anomalous-seeming glare on the lens", False),
            ("The scene is normal", True),
        ],
    )
    def test_verdict_words(self, text: str, expected: bool) -> None:
        """Test detection of summaries that judge normality."""
        assert has_verdict_words(text) is expected

    async def test_compute_grounding(
        self, make_gateway: GatewayFactory, frames: list[bytes]
    ) -> None:
        """Test similarities from scripted joint embeddings."""
        batch = [unit(16, 0), unit(16, 0), unit(16, 0)] + [unit(16, i) for i in range(1, 7)]
        gateway = make_gateway(ScriptedScenario(joint_embeddings=[batch]))

        stats = await compute_grounding("a summary", frames, gateway, 0.1, 4)

        assert stats.similarities == [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        assert stats.mu == pytest.approx(0.5)
        assert gate_decision(stats, 0.30, 0.80)


class TestRefreshSchedule:
    """Tests for refresh_due."""

    def test_schedule(self) -> None:
        """Test stride and minimum history."""
        config = CeaConfig(stride=5, min_history=3)
        full = buffer_of([unit(2, 0)] * 8)

        assert [c for c in range(1, 16) if refresh_due(full, c, config)] == [5, 10, 15]
        assert not refresh_due(buffer_of([unit(2, 0)] * 2), 5, config)


class TestRunCea:
    """Tests for run_cea over scripted scenarios."""

    @staticmethod
    def setup(h: int) -> tuple[list[Segment], SyntheticFrameSource]:
        return segment_frames(h * 16, 16, 8), SyntheticFrameSource("Fighting001_x264", h * 16)

    async def test_refresh_at_five_and_ten(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that a 12-segment run refreshes exactly at c=5 and c=10."""
        segments, source = self.setup(12)
        gateway = make_gateway(
            ScriptedScenario(verdicts=verdicts(12), summaries=["- a street", "- a shop front"])
        )

        result = await run_cea(segments, config, gateway, source)

        assert result.refresh_counts == [5, 10]
        assert len(result.verdicts) == 12
        assert [t.index for t in result.trace] == list(range(12))
        ledger = gateway.metrics.ledger()
        assert ledger["score_segment"] == 12
        assert ledger["summarize"] == 2
        assert ledger["embed_image"] == 12

    async def test_accepted_summary_conditions_following_segments(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that an accepted summary is used until a rejected refresh replaces it."""
        segments, source = self.setup(12)
        accept = [unit(16, 0), unit(16, 0), unit(16, 0)] + [unit(16, i) for i in range(1, 7)]
        reject = [unit(16, 0)] + [unit(16, i) for i in range(1, 9)]
        gateway = make_gateway(
            ScriptedScenario(
                verdicts=verdicts(12),
                summaries=["- a street", "- a shop front"],
                joint_embeddings=[accept, reject],
            )
        )

        result = await run_cea(segments, config, gateway, source)

        assert [r.outcome for r in result.refreshes] == [
            RefreshOutcome.ACCEPTED,
            RefreshOutcome.GATE_REJECTED,
        ]
        used = [v.used_summary for v in result.verdicts]
        assert used == [False] * 4 + [True] * 5 + [False] * 3
        assert result.verdicts[4].summary_snapshot == "- a street"
        assert result.trace[4].refreshed is True

    async def test_ungated_accepts_everything(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that ungated mode uses every refreshed summary."""
        segments, source = self.setup(12)
        reject = [unit(16, 0)] + [unit(16, i) for i in range(1, 9)]
        gateway = make_gateway(
            ScriptedScenario(
                verdicts=verdicts(12),
                summaries=["- a street", "- a shop front"],
                joint_embeddings=[reject, reject],
            )
        )
        ungated = override_config(config, {"cea.mode": "ungated"})

        result = await run_cea(segments, ungated, gateway, source)

        assert [r.outcome for r in result.refreshes] == [RefreshOutcome.UNGATED] * 2
        assert result.verdicts[9].summary_snapshot == "- a shop front"

    async def test_mode_none_never_summarises(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that the no-context mode never calls the captioner."""
        segments, source = self.setup(12)
        gateway = make_gateway(ScriptedScenario(verdicts=verdicts(12)))

        no_context = override_config(config, {"cea.mode": "none"})

        result = await run_cea(segments, no_context, gateway, source)

        assert result.refreshes == []
        assert gateway.metrics.ledger()["summarize"] == 0
        assert not any(v.used_summary for v in result.verdicts)

    async def test_summary_judging_normality_is_rejected(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that a summary containing a verdict word never reaches the gate."""
        segments, source = self.setup(5)
        gateway = make_gateway(
            ScriptedScenario(verdicts=verdicts(5), summaries=["The scene looks normal."])
        )

        result = await run_cea(segments, config, gateway, source)

        assert result.refreshes[0].outcome == RefreshOutcome.VERDICT_WORDS
        assert gateway.metrics.ledger()["embed_joint"] == 0
        assert result.verdicts[4].used_summary is False

    async def test_summary_failure_keeps_scoring(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that a failed refresh is recorded and scoring continues without context."""
        segments, source = self.setup(6)
        gateway = make_gateway(ScriptedScenario(verdicts=verdicts(6)))

        result = await run_cea(segments, config, gateway, source)

        assert result.refreshes[0].outcome == RefreshOutcome.MODEL_ERROR
        assert result.refreshes[0].error
        assert len(result.verdicts) == 6

    async def test_scorer_failure_is_isolated(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test that a segment whose scoring fails gets a placeholder verdict."""
        segments, source = self.setup(3)
        gateway = make_gateway(ScriptedScenario(verdicts=verdicts(2, flag=1)))

        result = await run_cea(segments, config, gateway, source)

        assert [v.flag for v in result.verdicts] == [1, 1, 0]
        assert result.verdicts[2].explanation == ERROR_EXPLANATION
        assert [(e.segment_index, e.stage) for e in result.errors] == [(2, "score")]
        assert result.trace[2].error

    async def test_empty_segments(
        self, make_gateway: GatewayFactory, config: PipelineConfig
    ) -> None:
        """Test the precondition on segments."""
        with pytest.raises(ValueError):
            gateway = make_gateway(ScriptedScenario())
            await run_cea([], config, gateway, SyntheticFrameSource("v", 1))

    async def test_identical_frames_keep_scripted_order(self, config: PipelineConfig) -> None:
        """Test that a static camera gets each scripted verdict in segment order."""
        segments = segment_frames(64, 16, 8)
        source = InMemoryFrameSource("Static001_x264", [render_frame("static", 0)] * 64)
        scripted = [
            ScriptedVerdict(flag=flag, explanation=f"Frame group {i}.")
            for i, flag in enumerate([0, 1, 1, 0])
        ]
        cache = MemoryResponseCache()
        first = build_gateway(
            config, ScriptedScenario(verdicts=scripted), cache=cache, metrics=GatewayMetrics()
        )

        result = await run_cea(segments, config, first, source)

        assert [v.flag for v in result.verdicts] == [0, 1, 1, 0]
        assert [v.explanation for v in result.verdicts] == [s.explanation for s in scripted]
        assert isinstance(first.backend, ScriptedBackend)
        assert first.backend.consumed("score") == 4

        rerun = build_gateway(
            config, ScriptedScenario(verdicts=scripted), cache=cache, metrics=GatewayMetrics()
        )
        again = await run_cea(segments, config, rerun, source)

        assert [v.flag for v in again.verdicts] == [0, 1, 1, 0]
        assert isinstance(rerun.backend, ScriptedBackend)
        assert rerun.backend.consumed("score") == 0
