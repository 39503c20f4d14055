"""Model gateway: typed operations over a backend, with caching and telemetry."""

import io
import json
import re
from collections.abc import Awaitable, Callable
from typing import Any

import structlog
from PIL import Image, UnidentifiedImageError

from anomalens.cache import CacheKey, CacheRecord, MemoryResponseCache, ResponseCache, create_cache
from anomalens.cache.base import CachedResponse, sha256_hex
from anomalens.config import PipelineConfig
from anomalens.evaluation.judge import UNKNOWN_LABEL, normalize_alias
from anomalens.gateway.base import (
    FrameDecodeError,
    GatewayConfigError,
    MediaItem,
    ModelBackend,
    VerdictParseError,
    chat_kind,
)
from anomalens.gateway.http import HttpBackend
from anomalens.gateway.models import ModelEndpoint, Role, SegmentVerdict
from anomalens.gateway.prompts import STRICT_FORMAT_REMINDER, PromptId, get_template
from anomalens.gateway.scripted import ScriptedBackend, ScriptedScenario
from anomalens.telemetry import GatewayMetrics

logger = structlog.get_logger(__name__)

FLAG_PATTERN = re.compile(r"^\s*anomaly\s*:\s*([01])\b", re.IGNORECASE | re.MULTILINE)
JSON_OBJECT_PATTERN = re.compile(r"\{.*?\}", re.DOTALL)

MAX_EVIDENCE = 10


def check_frame(frame: bytes) -> None:
    """
    Verify that bytes decode as an image.

    Raises:
        FrameDecodeError: for empty or undecodable media
    """
    if not frame:
        raise FrameDecodeError("empty image payload")
    try:
        with Image.open(io.BytesIO(frame)) as img:
            img.verify()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise FrameDecodeError(f"cannot decode image ({len(frame)} bytes): {e}") from e


def parse_verdict(text: str) -> tuple[int, str] | None:
    """Extract (flag, explanation) from scorer output, or None when malformed."""
    match = FLAG_PATTERN.search(text)
    if match is None:
        return None
    explanation = (text[: match.start()] + text[match.end() :]).strip()
    if not explanation:
        return None
    return int(match.group(1)), explanation


def parse_judge_label(text: str, labels: list[str]) -> str | None:
    """
    Parse a judge reply into a label from ``labels`` (or "unknown").

    Accepts a bare JSON object or the first object embedded in surrounding text.
    Returns None when the reply is unusable.
    """
    candidates = [text.strip()] + JSON_OBJECT_PATTERN.findall(text)
    for candidate in candidates:
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if not isinstance(data, dict) or not isinstance(data.get("label"), str):
            continue
        raw = data["label"]
        if raw.strip().lower() == UNKNOWN_LABEL:
            return UNKNOWN_LABEL
        label = normalize_alias(raw)
        if label in labels:
            return label
        return None
    return None


def judge_schema(labels: list[str]) -> dict[str, Any]:
    """JSON schema constraining the judge to the closed label set."""
    return {
        "type": "object",
        "properties": {"label": {"type": "string", "enum": [*labels, UNKNOWN_LABEL]}},
        "required": ["label"],
        "additionalProperties": False,
    }


class ModelGateway:
    """
    Uniform access to every model role.

    Each operation renders its prompt, consults the response cache, calls the
    backend on a miss and records the call in the metrics ledger. The gateway
    is safe to share between concurrently processed videos; a scripted backend
    is not, so scripted runs build one gateway per video.
    """

    def __init__(
        self,
        backend: ModelBackend,
        config: PipelineConfig,
        cache: ResponseCache | None = None,
        metrics: GatewayMetrics | None = None,
    ) -> None:
        self.backend = backend
        self.config = config
        self.cache = cache if cache is not None else MemoryResponseCache()
        self.metrics = metrics if metrics is not None else GatewayMetrics()
        self._dimensions: dict[Role, int] = {}
        self._positions: dict[str, int] = {}

    @property
    def frames_per_segment(self) -> int:
        return self.config.video.frames_per_segment

    def endpoint(self, role: Role) -> ModelEndpoint:
        endpoint = self.config.gateway.endpoint(role)
        if endpoint is None:
            raise GatewayConfigError(f"no endpoint configured for role {role.value}")
        return endpoint

    def _position(self, kind: str) -> int | None:
        """Next request number of an order-replayed kind; None for content-addressed kinds."""
        if not self.backend.replays_in_order(kind):
            return None
        position = self._positions.get(kind, 0)
        self._positions[kind] = position + 1
        return position

    async def _cached(
        self,
        endpoint: ModelEndpoint,
        key: CacheKey,
        request_digest: str,
        call: Callable[[], Awaitable[CachedResponse]],
    ) -> CachedResponse:
        role = endpoint.role
        record = await self.cache.get(role, key)
        if record is not None:
            self.metrics.record_cache_hit(role)
            logger.debug("Cache hit", role=role.value, key=key.digest[:12])
            return record.response

        with self.metrics.backend_call(role):
            response = await call()
        await self.cache.put(
            CacheRecord(
                key=key.digest,
                role=role,
                model=endpoint.model_name,
                request_digest=request_digest,
                response=response,
            )
        )
        return response

    async def _chat(
        self,
        endpoint: ModelEndpoint,
        prompt_id: PromptId,
        prompt: str,
        images: list[bytes],
        *,
        attempt: int = 0,
        json_schema: dict[str, Any] | None = None,
    ) -> str:
        position = self._position(chat_kind(prompt_id))
        key = CacheKey.build(
            endpoint.role, endpoint.model_name, prompt, list(images), attempt, position
        )

        async def call() -> CachedResponse:
            return await self.backend.chat(
                endpoint,
                prompt,
                images,
                prompt_id=prompt_id,
                temperature=0.0,
                json_schema=json_schema,
                position=position,
            )

        response = await self._cached(endpoint, key, sha256_hex(prompt), call)
        return str(response)

    async def _embed(self, endpoint: ModelEndpoint, items: list[MediaItem]) -> list[list[float]]:
        position = self._position(endpoint.role.value)
        key = CacheKey.build(endpoint.role, endpoint.model_name, "", items, position=position)
        request_digest = sha256_hex("".join(sha256_hex(item) for item in items))

        async def call() -> CachedResponse:
            return await self.backend.embed(endpoint, items, position=position)

        response = await self._cached(endpoint, key, request_digest, call)
        if not isinstance(response, list):
            raise GatewayConfigError(f"{endpoint.model_name}: cached response is not a vector list")
        vectors = [list(v) for v in response]
        self._check_dimensions(endpoint, vectors)
        return vectors

    def _check_dimensions(self, endpoint: ModelEndpoint, vectors: list[list[float]]) -> None:
        sizes = {len(v) for v in vectors}
        if len(sizes) != 1:
            raise GatewayConfigError(
                f"{endpoint.model_name}: mixed embedding dimensions {sorted(sizes)}"
            )
        size = sizes.pop()
        expected = self._dimensions.setdefault(endpoint.role, size)
        if size != expected:
            raise GatewayConfigError(
                f"{endpoint.model_name}: embedding dimension changed from {expected} to {size}"
            )

    async def embed_image(self, frame: bytes) -> list[float]:
        """Raw image embedding; normalisation is left to the caller."""
        check_frame(frame)
        endpoint = self.endpoint(Role.IMAGE_EMBEDDER)
        self.metrics.record_request(endpoint.role, "embed_image")
        vectors = await self._embed(endpoint, [frame])
        if len(vectors) != 1:
            raise GatewayConfigError(f"{endpoint.model_name}: expected one vector")
        return vectors[0]

    async def embed_joint(self, items: list[MediaItem]) -> list[list[float]]:
        """Embed texts and images into the shared image-text space, one vector per item."""
        if not items:
            raise ValueError("items must not be empty")
        for item in items:
            if isinstance(item, bytes):
                check_frame(item)
        endpoint = self.endpoint(Role.JOINT_EMBEDDER)
        self.metrics.record_request(endpoint.role, "embed_joint")
        vectors = await self._embed(endpoint, items)
        if len(vectors) != len(items):
            raise GatewayConfigError(
                f"{endpoint.model_name}: expected {len(items)} vectors, got {len(vectors)}"
            )
        return vectors

    async def score_segment(
        self,
        frames: list[bytes],
        summary: str | None = None,
        *,
        segment_index: int = 0,
    ) -> SegmentVerdict:
        """
        Score one segment, optionally conditioned on a historical summary.

        Args:
            frames: The segment's sampled frames
            summary: Accepted context summary; None renders the frame-only prompt
            segment_index: Ordinal recorded on the verdict

        Raises:
            VerdictParseError: when neither the reply nor the stricter retry parses
        """
        if len(frames) != self.frames_per_segment:
            raise ValueError(
                f"frames must hold exactly {self.frames_per_segment} images, got {len(frames)}"
            )
        for frame in frames:
            check_frame(frame)

        endpoint = self.endpoint(Role.SCORER)
        self.metrics.record_request(endpoint.role, "score_segment")
        if summary is None:
            prompt_id = PromptId.SCORE
            prompt = get_template(prompt_id).render()
        else:
            prompt_id = PromptId.SCORE_CTX
            prompt = get_template(prompt_id).render(summary=summary)

        log = logger.bind(segment=segment_index, prompt_id=prompt_id.value)
        text = await self._chat(endpoint, prompt_id, prompt, frames)
        parsed = parse_verdict(text)
        if parsed is None:
            log.warning("Unparseable scorer reply, retrying with format reminder")
            text = await self._chat(
                endpoint, prompt_id, prompt + STRICT_FORMAT_REMINDER, frames, attempt=1
            )
            parsed = parse_verdict(text)
        if parsed is None:
            raise VerdictParseError(f"segment {segment_index}: no anomaly flag in reply", text)

        flag, explanation = parsed
        log.debug("Segment scored", flag=flag)
        return SegmentVerdict(
            segment_index=segment_index,
            flag=flag,
            explanation=explanation,
            used_summary=summary is not None,
            summary_snapshot=summary,
        )

    async def summarize(self, key_frames: list[bytes]) -> str:
        """Describe the key frames of the history buffer."""
        if not key_frames:
            raise ValueError("key_frames must not be empty")
        for frame in key_frames:
            check_frame(frame)
        endpoint = self.endpoint(Role.CAPTIONER)
        self.metrics.record_request(endpoint.role, "summarize")
        prompt = get_template(PromptId.SUMMARY).render()
        text = await self._chat(endpoint, PromptId.SUMMARY, prompt, key_frames)
        return text.strip()

    def caption_prompt(self, evidence: list[str]) -> str:
        """Render the event caption prompt for the given observations."""
        lines = "\n".join(f"{n}. {text}" for n, text in enumerate(evidence, start=1))
        return get_template(PromptId.CAPTION).render(evidence=lines)

    async def caption_event(self, frames: list[bytes], evidence: list[str]) -> str:
        """
        Narrate one detected event from its frames and representative observations.

        The segment scorer model writes event narratives, so calls go to the
        scorer endpoint.
        """
        if len(frames) != self.frames_per_segment:
            raise ValueError(
                f"frames must hold exactly {self.frames_per_segment} images, got {len(frames)}"
            )
        if not 1 <= len(evidence) <= MAX_EVIDENCE:
            raise ValueError(f"evidence must hold 1 to {MAX_EVIDENCE} texts, got {len(evidence)}")
        for frame in frames:
            check_frame(frame)
        endpoint = self.endpoint(Role.SCORER)
        self.metrics.record_request(endpoint.role, "caption_event")
        text = await self._chat(endpoint, PromptId.CAPTION, self.caption_prompt(evidence), frames)
        return text.strip()

    async def judge_category(self, explanation: str, labels: list[str]) -> str:
        """
        Closed-set category prediction from explanation text alone.

        Never raises on model misbehaviour: after the initial call and up to
        ``max_retries`` retries without a valid label, returns "unknown".
        """
        endpoint = self.endpoint(Role.JUDGE)
        self.metrics.record_request(endpoint.role, "judge_category")
        prompt = get_template(PromptId.JUDGE).render(
            labels="\n".join(labels), explanation=explanation
        )
        schema = judge_schema(labels)
        log = logger.bind(role=endpoint.role.value)

        for attempt in range(endpoint.max_retries + 1):
            try:
                text = await self._chat(
                    endpoint, PromptId.JUDGE, prompt, [], attempt=attempt, json_schema=schema
                )
            except Exception as e:
                log.warning("Judge call failed", attempt=attempt, error=str(e))
                continue
            label = parse_judge_label(text, labels)
            if label is not None:
                return label
            log.warning("Invalid judge reply", attempt=attempt, reply=text[:120])

        return UNKNOWN_LABEL

    async def close(self) -> None:
        """Close the backend; the cache belongs to whoever created it."""
        await self.backend.close()


def build_gateway(
    config: PipelineConfig,
    scenario: ScriptedScenario | None = None,
    cache: ResponseCache | None = None,
    metrics: GatewayMetrics | None = None,
) -> ModelGateway:
    """
    Build a gateway for the configured backend.

    Args:
        config: Pipeline configuration
        scenario: Replies for the scripted backend (required when it is selected)
        cache: Response cache; defaults to the configured backend
        metrics: Shared metrics ledger
    """
    backend: ModelBackend
    if config.gateway.backend == "scripted":
        if scenario is None:
            raise GatewayConfigError("scripted backend requires a scenario")
        backend = ScriptedBackend(scenario)
    else:
        backend = HttpBackend()
    if cache is None:
        cache = create_cache(config)
    return ModelGateway(backend, config, cache=cache, metrics=metrics)
