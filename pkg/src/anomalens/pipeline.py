"""Per-video orchestration, dataset runs and parameter sweeps."""

import asyncio
import itertools
from collections.abc import Callable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from pathlib import Path
from time import perf_counter
from typing import Any

import numpy as np
import pandas as pd
import structlog
import yaml

from anomalens.artifacts import report_summary, write_run
from anomalens.cache import ResponseCache, create_cache
from anomalens.cea import run_cea
from anomalens.config import (
    ConfigError,
    PipelineConfig,
    Settings,
    dump_config,
    get_settings,
    override_config,
)
from anomalens.evaluation.annotations import load_annotations
from anomalens.evaluation.detection import (
    UndefinedMetricError,
    average_precision,
    mean_iou,
    roc_auc,
)
from anomalens.evaluation.judge import (
    UNKNOWN_LABEL,
    accuracy_by_variant,
    infer_gold_category,
    judge_variants,
    normalize_alias,
    token_length_by_variant,
)
from anomalens.evaluation.scores import count_events, expand_and_smooth
from anomalens.explainer import explain_events
from anomalens.gateway.client import ModelGateway, build_gateway
from anomalens.gateway.scripted import ScriptedScenario
from anomalens.ingest import DirectoryFrameSource, FrameSource, Manifest, ingest_video
from anomalens.lexicon import DEFAULT_LEXICON, Lexicon
from anomalens.models.evaluation import AnnotationRecord
from anomalens.models.run import RunArtifact, RunReport, StageTiming, VideoArtifact, VideoStatus
from anomalens.rea import flag_runs, run_rea
from anomalens.synthetic import ScenarioError, load_scenario
from anomalens.telemetry import GatewayMetrics

logger = structlog.get_logger(__name__)


def gold_category(video_id: str, annotation: AnnotationRecord | None) -> str | None:
    """Gold class from the video name, falling back to the annotation's category."""
    gold = infer_gold_category(video_id)
    if gold is None and annotation is not None:
        label = normalize_alias(annotation.category)
        gold = None if label == UNKNOWN_LABEL else label
    return gold


def _mean(values: Sequence[float]) -> float | None:
    return float(np.mean(values)) if values else None


class PipelineEngine:
    """
    Runs videos through scoring, aggregation, explanation and evaluation.

    With the scripted backend every video gets its own gateway (scripted
    replies are positional); with HTTP one gateway is shared. The response
    cache and the metrics ledger are always shared across the run.
    """

    def __init__(
        self,
        config: PipelineConfig,
        cache: ResponseCache | None = None,
        metrics: GatewayMetrics | None = None,
        settings: Settings | None = None,
        lexicon: Lexicon = DEFAULT_LEXICON,
    ) -> None:
        self.config = config
        self.cache = cache if cache is not None else create_cache(config)
        self.metrics = metrics if metrics is not None else GatewayMetrics()
        self.lexicon = lexicon
        self._settings = settings or get_settings()
        self._shared_gateway: ModelGateway | None = None

    def gateway_for(self, scenario: ScriptedScenario | None = None) -> ModelGateway:
        if self.config.gateway.backend == "scripted":
            return build_gateway(self.config, scenario, cache=self.cache, metrics=self.metrics)
        if self._shared_gateway is None:
            self._shared_gateway = build_gateway(
                self.config, cache=self.cache, metrics=self.metrics
            )
        return self._shared_gateway

    async def close(self, close_cache: bool = True) -> None:
        if self._shared_gateway is not None:
            await self._shared_gateway.close()
            self._shared_gateway = None
        if close_cache:
            await self.cache.close()

    @contextmanager
    def _timed(self, artifact: VideoArtifact, stage: str) -> Iterator[None]:
        start = perf_counter()
        try:
            yield
        finally:
            artifact.timings.append(
                StageTiming(
                    video_id=artifact.video_id, stage=stage, seconds=perf_counter() - start
                )
            )

    async def run_video(
        self,
        source: FrameSource,
        annotation: AnnotationRecord | None = None,
        scenario: ScriptedScenario | None = None,
        gateway: ModelGateway | None = None,
    ) -> VideoArtifact:
        """
        Score, aggregate, explain and evaluate one video.

        A failing stage marks the video failed and keeps whatever earlier
        stages produced; it never raises.
        """
        video_id = source.video_id
        log = logger.bind(video_id=video_id)
        artifact = VideoArtifact(video_id=video_id, gold=gold_category(video_id, annotation))
        stage = "gateway"
        owned = gateway is None
        try:
            if gateway is None:
                gateway = self.gateway_for(scenario)

            stage = "ingest"
            with self._timed(artifact, stage):
                segments, bound = ingest_video(source, self.config, annotation)
            artifact.frame_count = source.frame_count
            artifact.segment_count = len(segments)
            log.info("Scoring video", segments=len(segments))

            stage = "cea"
            with self._timed(artifact, stage):
                artifact.cea = await run_cea(segments, self.config, gateway, source)
            verdicts = artifact.cea.verdicts

            stage = "rea"
            with self._timed(artifact, stage):
                field, intervals = run_rea(verdicts, self.config.rea, self.lexicon)
            artifact.field, artifact.intervals = field, intervals
            artifact.raw_flag_runs = len(flag_runs(verdicts))

            stage = "explain"
            if intervals.windows:
                with self._timed(artifact, stage):
                    artifact.events = await explain_events(
                        field, verdicts, intervals, segments, source, gateway, self.config
                    )

            stage = "smooth"
            with self._timed(artifact, stage):
                artifact.track = expand_and_smooth(
                    field,
                    [s.frame_range for s in segments],
                    source.frame_count,
                    self.config.metrics.smooth_sigma,
                    video_id=video_id,
                    labels=bound.frame_labels() if bound is not None else None,
                )

            stage = "judge"
            if self.config.judge.enabled and artifact.gold and artifact.events:
                with self._timed(artifact, stage):
                    artifact.judge = await judge_variants(
                        artifact.events,
                        verdicts,
                        field,
                        gateway,
                        video_id,
                        artifact.gold,
                        labels=self.config.judge.labels,
                        rng_seed=self.config.seed,
                    )
        except Exception as e:
            log.exception("Video failed", stage=stage)
            artifact.status = VideoStatus.FAILED
            artifact.error = str(e)
            artifact.failed_stage = stage
        finally:
            if owned and gateway is not None and gateway is not self._shared_gateway:
                await gateway.close()

        log.info(
            "Video finished",
            status=artifact.status.value,
            intervals=len(artifact.intervals) if artifact.intervals else 0,
        )
        return artifact

    async def _run_entry(
        self,
        video_id: str,
        frames: Path,
        scenario_path: Path | None,
        annotation: AnnotationRecord | None,
        semaphore: asyncio.Semaphore,
    ) -> VideoArtifact:
        async with semaphore:
            if not frames.is_dir():
                logger.warning("Video missing", video_id=video_id, frames=str(frames))
                return VideoArtifact(
                    video_id=video_id,
                    status=VideoStatus.MISSING,
                    error=f"frame directory not found: {frames}",
                )
            scenario = None
            if self.config.gateway.backend == "scripted":
                try:
                    if scenario_path is None:
                        raise ScenarioError("scripted backend needs a scenario for every video")
                    scenario = load_scenario(scenario_path)
                except ScenarioError as e:
                    logger.error("Scenario unavailable", video_id=video_id, error=str(e))
                    return VideoArtifact(
                        video_id=video_id,
                        status=VideoStatus.FAILED,
                        error=str(e),
                        failed_stage="gateway",
                    )

            self.metrics.active_videos.inc()
            try:
                source = DirectoryFrameSource(frames, video_id)
                return await self.run_video(source, annotation, scenario)
            finally:
                self.metrics.active_videos.dec()

    async def run_dataset(self, manifest: Manifest) -> RunArtifact:
        """
        Process every manifest video concurrently and pool the metrics.

        Missing videos are listed in the report; metrics cover the present subset.
        """
        annotations = load_annotations(manifest.annotations) if manifest.annotations else {}
        semaphore = asyncio.Semaphore(self._settings.max_concurrent_videos)
        logger.info("Starting dataset run", videos=len(manifest.videos))

        videos = list(
            await asyncio.gather(
                *(
                    self._run_entry(
                        entry.id, entry.frames, entry.scenario, annotations.get(entry.id), semaphore
                    )
                    for entry in manifest.videos
                )
            )
        )
        report = await self.build_report(videos, annotations)
        return RunArtifact(report=report, videos=videos)

    async def build_report(
        self, videos: list[VideoArtifact], annotations: Mapping[str, AnnotationRecord]
    ) -> RunReport:
        """Pool per-video results into dataset metrics."""
        completed = [v for v in videos if v.status == VideoStatus.COMPLETED]
        tracks = [v.track for v in completed if v.track is not None]
        labelled = [t for t in tracks if t.labels is not None]
        annotated = [t for t in tracks if t.video_id in annotations]
        undefined: dict[str, str] = {}

        def metric(name: str, compute: Callable[[], float]) -> float | None:
            try:
                return compute()
            except UndefinedMetricError as e:
                logger.warning("Metric undefined", metric=name, reason=str(e))
                undefined[name] = str(e)
                return None

        judged = [j for v in completed for j in v.judge]
        report = RunReport(
            auc=metric("auc", lambda: roc_auc(labelled)),
            ap=metric("ap", lambda: average_precision(labelled)),
            miou=metric(
                "miou",
                lambda: mean_iou(annotated, annotations, self.config.metrics.binarize_threshold),
            ),
            undefined_metrics=undefined,
            events_per_video=_mean(
                [len(v.intervals) for v in completed if v.intervals is not None]
            ),
            raw_events_per_video=_mean([v.raw_flag_runs for v in completed]),
            frame_events_per_video=_mean(
                [count_events(t, self.config.metrics.event_threshold) for t in tracks]
            ),
            judge_accuracy_by_variant=accuracy_by_variant(judged),
            judge_token_length_by_variant=token_length_by_variant(judged),
            videos=[v.summary() for v in videos],
            missing_videos=[v.video_id for v in videos if v.status == VideoStatus.MISSING],
            failed_videos=[v.video_id for v in videos if v.status == VideoStatus.FAILED],
            call_ledger=self.metrics.ledger(),
            role_ledger=self.metrics.role_ledger(),
            cache_digests=await self.cache.digests(),
            config=dump_config(self.config),
        )
        logger.info(
            "Run report ready",
            auc=report.auc,
            completed=len(completed),
            missing=len(report.missing_videos),
            failed=len(report.failed_videos),
        )
        return report


async def run_pipeline(config: PipelineConfig, manifest: Manifest, out_dir: Path) -> RunArtifact:
    """
    Run a dataset and write its artifacts to ``out_dir``.

    Scripted runs keep their response cache under ``out_dir/cache``.
    """
    cache = None
    if config.gateway.backend == "scripted":
        cache = create_cache(config, directory=out_dir / "cache")
    engine = PipelineEngine(config, cache=cache)
    try:
        artifact = await engine.run_dataset(manifest)
    finally:
        await engine.close()
    write_run(artifact, out_dir, engine.metrics.exposition())
    return artifact


def load_grid(path: Path) -> dict[str, list[Any]]:
    """
    Load a sweep grid: a YAML mapping of dotted config paths to value lists.

    Raises:
        ConfigError: when the file is not such a mapping
    """
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    axes = data.get("grid", data) if isinstance(data, dict) else None
    if not isinstance(axes, dict) or not axes:
        raise ConfigError(f"{path}: expected a mapping of dotted paths to value lists")
    for axis, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{path}: axis {axis!r} needs a non-empty list of values")
    return {str(axis): list(values) for axis, values in axes.items()}


async def run_sweep(
    config: PipelineConfig,
    manifest: Manifest,
    grid: Mapping[str, list[Any]],
    out_dir: Path,
) -> pd.DataFrame:
    """
    Run the dataset once per grid cell; every cell writes a full run under
    ``cell_NNN/`` and the grid table goes to ``grid.csv``.

    Scripted cells each get a fresh cache in their own directory so replies
    replay from the start; HTTP cells share one cache.
    """
    axes = list(grid)
    cells = [dict(zip(axes, values, strict=True)) for values in itertools.product(*grid.values())]
    # Validate every cell before running any.
    cell_configs = [override_config(config, overrides) for overrides in cells]
    shared_cache = None if config.gateway.backend == "scripted" else create_cache(config)

    rows: list[dict[str, Any]] = []
    for n, (overrides, cell_config) in enumerate(zip(cells, cell_configs, strict=True)):
        cell_dir = out_dir / f"cell_{n:03d}"
        cache = (
            shared_cache
            if shared_cache is not None
            else create_cache(cell_config, directory=cell_dir / "cache")
        )
        logger.info("Running sweep cell", cell=n, of=len(cells), **overrides)
        engine = PipelineEngine(cell_config, cache=cache)
        try:
            artifact = await engine.run_dataset(manifest)
        finally:
            await engine.close(close_cache=shared_cache is None)
        write_run(artifact, cell_dir, engine.metrics.exposition())
        rows.append({"cell": cell_dir.name, **overrides, **report_summary(artifact.report)})

    if shared_cache is not None:
        await shared_cache.close()
    table = pd.DataFrame(rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(out_dir / "grid.csv", index=False)
    logger.info("Sweep finished", cells=len(cells), out=str(out_dir))
    return table
