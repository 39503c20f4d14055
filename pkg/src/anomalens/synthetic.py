"""
Synthetic scenarios for offline runs.

A scenario spec describes a video at segment level (event intervals, cue and
negation densities, fragmentation noise). Generation yields the scripted
replies, ground truth and a frame source whose frames are unique per index,
so every model request of a run is distinct and replays deterministically.
"""

import hashlib
import io
import json
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
import structlog
import yaml
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from anomalens.config import CANONICAL_LABELS
from anomalens.evaluation.annotations import dump_annotations
from anomalens.gateway.scripted import ScriptedScenario, ScriptedVerdict
from anomalens.ingest import FrameSource, IngestError
from anomalens.models.evaluation import AnnotationRecord

logger = structlog.get_logger(__name__)

NORMAL_CATEGORY = "normal"

CATEGORY_CUES: dict[str, tuple[str, ...]] = {
    "abuse": ("hit", "kick"),
    "arrest": ("chase", "running"),
    "arson": ("fire", "arson"),
    "assault": ("assault", "punch"),
    "burglary": ("burglary", "break in"),
    "explosion": ("explosion", "fire"),
    "fighting": ("fighting", "punch"),
    "roadaccidents": ("crash", "collision"),
    "robbery": ("robbery", "gun"),
    "shoplifting": ("steal", "theft"),
    "shooting": ("shoot", "gun"),
    "stealing": ("stealing", "theft"),
    "vandalism": ("vandalism", "breaking"),
}

PLACES = ("entrance", "counter", "parking lot", "sidewalk", "corridor", "intersection")
NEGATION_SENTENCE = " There is no anomaly."

# Normal segments kept between a noise burst and anything else flagged.
NOISE_MARGIN = 4


class ScenarioError(ValueError):
    """A scenario spec that cannot be generated."""

    pass


class ScenarioSpec(BaseModel):
    """Segment-level description of one synthetic video."""

    model_config = ConfigDict(extra="forbid")

    video_id: str | None = None
    category: str = "robbery"
    segments: int = Field(default=40, ge=1)  # h
    events: list[tuple[int, int]] = Field(default_factory=list)
    cue_density: float = Field(default=0.5, ge=0.0, le=1.0)
    negation_density: float = Field(default=0.3, ge=0.0, le=1.0)
    noise_bursts: int = Field(default=0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _valid_events(self) -> "ScenarioSpec":
        if self.category != NORMAL_CATEGORY and self.category not in CANONICAL_LABELS:
            raise ValueError(f"unknown category {self.category!r}")
        previous_end = -1
        for start, end in sorted(self.events):
            if not 0 <= start <= end < self.segments:
                raise ValueError(f"event [{start}, {end}] outside [0, {self.segments - 1}]")
            if start <= previous_end:
                raise ValueError(f"event [{start}, {end}] overlaps another event")
            previous_end = end
        return self

    @property
    def resolved_video_id(self) -> str:
        if self.video_id:
            return self.video_id
        if self.category == NORMAL_CATEGORY:
            return f"Normal_Videos_{self.seed:03d}_x264"
        return f"{self.category.capitalize()}{self.seed:03d}_x264"


class ScenarioSet(BaseModel):
    """A synth spec file: shared segment length plus one spec per video."""

    model_config = ConfigDict(extra="forbid")

    segment_len: int = Field(default=16, ge=1)
    videos: list[ScenarioSpec] = Field(default_factory=list)


class GeneratedScenario(BaseModel):
    """Scripted replies and ground truth for one synthetic video."""

    video_id: str
    spec: ScenarioSpec
    scenario: ScriptedScenario
    segment_labels: list[int]
    noise_spikes: list[int] = Field(default_factory=list)
    annotation: AnnotationRecord
    segment_len: int

    @property
    def frame_count(self) -> int:
        return self.spec.segments * self.segment_len


def _place_noise(
    rng: np.random.Generator, spec: ScenarioSpec, occupied: np.ndarray
) -> list[int]:
    """Spike positions of every burst; each burst alternates flagged and normal segments."""
    spikes: list[int] = []
    for burst in range(spec.noise_bursts):
        count = int(rng.integers(2, 4))
        width = 2 * count - 1
        starts = [
            s
            for s in range(spec.segments - width + 1)
            if not occupied[max(0, s - NOISE_MARGIN) : s + width + NOISE_MARGIN].any()
        ]
        if not starts:
            raise ScenarioError(
                f"no room for noise burst {burst + 1} of {spec.noise_bursts} "
                f"in {spec.segments} segments"
            )
        start = int(rng.choice(starts))
        occupied[start : start + width] = True
        spikes.extend(range(start, start + width, 2))
    return sorted(spikes)


def generate_scenario(spec: ScenarioSpec, segment_len: int = 16) -> GeneratedScenario:
    """
    Build a deterministic scripted scenario from a spec.

    Event segments are flagged and carry category cue phrases with probability
    ``cue_density``; normal segments carry a negation sentence with probability
    ``negation_density``. Noise bursts are isolated flagged spikes with no cues.

    Raises:
        ScenarioError: when the spec is invalid or noise cannot be placed
    """
    rng = np.random.default_rng(spec.seed)
    h = spec.segments
    labels = np.zeros(h, dtype=int)
    for start, end in spec.events:
        labels[start : end + 1] = 1

    spikes = _place_noise(rng, spec, labels.astype(bool).copy())
    spike_set = set(spikes)
    cues = CATEGORY_CUES.get(spec.category, ("attack",))
    video_id = spec.resolved_video_id
    camera = hashlib.sha256(video_id.encode("utf-8")).hexdigest()[:6]

    verdicts: list[ScriptedVerdict] = []
    for i in range(h):
        place = PLACES[int(rng.integers(len(PLACES)))]
        if labels[i]:
            text = f"Camera {camera}, segment {i}: a person moves abruptly near the {place}."
            if rng.random() < spec.cue_density:
                text += f" The frames suggest {rng.choice(cues)}."
            verdicts.append(ScriptedVerdict(flag=1, explanation=text))
        elif i in spike_set:
            text = f"Camera {camera}, segment {i}: a sudden movement is visible near the {place}."
            verdicts.append(ScriptedVerdict(flag=1, explanation=text))
        else:
            text = f"Camera {camera}, segment {i}: people walk calmly past the {place}."
            if rng.random() < spec.negation_density:
                text += NEGATION_SENTENCE
            verdicts.append(ScriptedVerdict(flag=0, explanation=text))

    summaries = [
        f"Key frames {n} show the {PLACES[n % len(PLACES)]} with people moving through the scene."
        for n in range(h)
    ]
    captions = [
        f"Camera {camera}, event {n}: a person is involved in {cues[0]} "
        f"near the {PLACES[n % len(PLACES)]}. "
        "The situation escalates before the scene calms down."
        for n in range(h)
    ]
    judge_label = spec.category if spec.category != NORMAL_CATEGORY else "unknown"
    scenario = ScriptedScenario(
        verdicts=verdicts,
        summaries=summaries,
        captions=captions,
        judge_replies=ScriptedScenario.judge_says(*([judge_label] * (4 * h))),
    )

    annotation = AnnotationRecord(
        video_id=video_id,
        category=spec.category,
        anomalous_intervals=[
            (start * segment_len, (end + 1) * segment_len - 1) for start, end in sorted(spec.events)
        ],
        total_frames=h * segment_len,
    )
    logger.debug(
        "Generated scenario",
        video_id=video_id,
        segments=h,
        events=len(spec.events),
        noise_spikes=len(spikes),
    )
    return GeneratedScenario(
        video_id=video_id,
        spec=spec,
        scenario=scenario,
        segment_labels=labels.tolist(),
        noise_spikes=spikes,
        annotation=annotation,
        segment_len=segment_len,
    )


@lru_cache(maxsize=4096)
def render_frame(video_id: str, index: int) -> bytes:
    """A tiny PNG: the first row encodes a digest of the video id, the rest the frame index."""
    tag = hashlib.sha256(video_id.encode("utf-8")).digest()
    image = Image.new("RGB", (4, 4), ((index >> 16) & 255, (index >> 8) & 255, index & 255))
    for x in range(4):
        image.putpixel((x, 0), (tag[3 * x], tag[3 * x + 1], tag[3 * x + 2]))
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


class SyntheticFrameSource(FrameSource):
    """Frames rendered on demand for a generated scenario."""

    def __init__(self, video_id: str, frame_count: int, unreadable: set[int] | None = None) -> None:
        self._video_id = video_id
        self._frame_count = frame_count
        self._unreadable = unreadable or set()

    @property
    def video_id(self) -> str:
        return self._video_id

    @property
    def frame_count(self) -> int:
        return self._frame_count

    def read(self, index: int) -> bytes:
        if not 0 <= index < self._frame_count:
            raise IngestError(f"{self._video_id}: frame {index} out of range")
        if index in self._unreadable:
            raise IngestError(f"{self._video_id}: cannot read frame {index}")
        return render_frame(self._video_id, index)


def frame_source_for(generated: GeneratedScenario) -> SyntheticFrameSource:
    return SyntheticFrameSource(generated.video_id, generated.frame_count)


def load_scenario_set(path: Path) -> ScenarioSet:
    """
    Load a YAML synth spec file.

    Raises:
        ScenarioError: for unreadable or invalid files
    """
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return ScenarioSet.model_validate(data)
    except (OSError, yaml.YAMLError) as e:
        raise ScenarioError(f"{path}: {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"{path}: {e.errors()[0]['msg']}") from e


def load_scenario(path: Path) -> ScriptedScenario:
    """Load scripted replies written by ``write_dataset``."""
    try:
        return ScriptedScenario.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ScenarioError(f"{path}: {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"{path}: {e.errors()[0]['msg']}") from e


def write_dataset(scenarios: list[GeneratedScenario], out_dir: Path) -> Path:
    """
    Write frames, scripted replies, annotations and a manifest for offline runs.

    Layout: ``frames/<video_id>/NNNNNN.png``, ``scenarios/<video_id>.json``,
    ``annotations.json`` and ``manifest.yaml``, all relative to ``out_dir``.

    Returns:
        Path of the manifest
    """
    ids = [g.video_id for g in scenarios]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"duplicate video ids: {sorted({i for i in ids if ids.count(i) > 1})}")

    (out_dir / "scenarios").mkdir(parents=True, exist_ok=True)
    videos: list[dict[str, Any]] = []
    for generated in scenarios:
        frame_dir = out_dir / "frames" / generated.video_id
        frame_dir.mkdir(parents=True, exist_ok=True)
        for index in range(generated.frame_count):
            (frame_dir / f"{index:06d}.png").write_bytes(render_frame(generated.video_id, index))
        scenario_path = out_dir / "scenarios" / f"{generated.video_id}.json"
        scenario_path.write_text(generated.scenario.model_dump_json(indent=2), encoding="utf-8")
        videos.append(
            {
                "id": generated.video_id,
                "frames": f"frames/{generated.video_id}",
                "scenario": f"scenarios/{generated.video_id}.json",
            }
        )

    annotations = dump_annotations([g.annotation for g in scenarios])
    (out_dir / "annotations.json").write_text(json.dumps(annotations, indent=2), encoding="utf-8")
    manifest = out_dir / "manifest.yaml"
    with open(manifest, "w") as f:
        yaml.safe_dump(
            {"videos": videos, "annotations": "annotations.json"}, f, sort_keys=False
        )
    logger.info("Wrote synthetic dataset", out=str(out_dir), videos=len(scenarios))
    return manifest
