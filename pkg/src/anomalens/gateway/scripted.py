"""Deterministic scripted backend for offline, reproducible runs."""

import hashlib
import json
from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, Field

from anomalens.gateway.base import (
    CHAT_KINDS,
    SCORE_KIND,
    MediaItem,
    ModelBackend,
    ScriptExhaustedError,
    chat_kind,
)
from anomalens.gateway.models import ModelEndpoint, Role
from anomalens.gateway.prompts import PromptId

logger = structlog.get_logger(__name__)


class ScriptedVerdict(BaseModel):
    """One scripted scorer reply; flag None produces a reply without a flag line."""

    flag: int | None = Field(default=None, ge=0, le=1)
    explanation: str

    def reply(self) -> str:
        if self.flag is None:
            return self.explanation
        return f"anomaly: {self.flag}\n{self.explanation}"


class ScriptedScenario(BaseModel):
    """
    Replies replayed by request position, per prompt kind.

    Embedding lists are optional: when absent (or exhausted), vectors are derived
    from a digest of the input so identical inputs always embed identically.
    """

    verdicts: list[ScriptedVerdict] = Field(default_factory=list)
    summaries: list[str] = Field(default_factory=list)
    captions: list[str] = Field(default_factory=list)
    image_embeddings: list[list[float]] | None = None
    joint_embeddings: list[list[list[float]]] | None = None
    judge_replies: list[str] = Field(default_factory=list)
    embedding_dim: int = Field(default=16, ge=1)

    @staticmethod
    def judge_says(*labels: str) -> list[str]:
        """Well-formed judge replies for the given labels."""
        return [json.dumps({"label": label}) for label in labels]


def digest_vector(item: MediaItem, dim: int) -> list[float]:
    """Pseudo-random but input-determined embedding."""
    raw = item.encode("utf-8") if isinstance(item, str) else item
    seed = int.from_bytes(hashlib.sha256(raw).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    return [float(x) for x in rng.standard_normal(dim)]


class ScriptedBackend(ModelBackend):
    """
    Replays a ScriptedScenario.

    Chat replies, and scripted embeddings when the scenario lists them, are
    served by request position: the n-th scorer request of a video gets the
    n-th verdict whether or not earlier requests were answered from the cache.
    One instance serves exactly one video.
    """

    def __init__(self, scenario: ScriptedScenario) -> None:
        self._scenario = scenario
        self._cursors: dict[str, int] = {}
        self._served: dict[str, int] = {}
        self.calls: list[tuple[str, str]] = []  # (kind, prompt) for inspection in tests

    @property
    def name(self) -> str:
        return "scripted"

    @property
    def scenario(self) -> ScriptedScenario:
        return self._scenario

    def replays_in_order(self, kind: str) -> bool:
        if kind == Role.IMAGE_EMBEDDER.value:
            return self._scenario.image_embeddings is not None
        if kind == Role.JOINT_EMBEDDER.value:
            return self._scenario.joint_embeddings is not None
        return kind in CHAT_KINDS

    def _position(self, kind: str, position: int | None) -> int:
        if position is None:
            position = self._cursors.get(kind, 0)
            self._cursors[kind] = position + 1
        return position

    def _next(self, kind: str, items: list[Any], position: int | None) -> Any:
        position = self._position(kind, position)
        if position >= len(items):
            raise ScriptExhaustedError(
                f"scripted {kind} replies exhausted: no reply at position {position}"
            )
        self._served[kind] = self._served.get(kind, 0) + 1
        return items[position]

    def consumed(self, kind: str) -> int:
        """Number of replies served for a kind (cache hits never reach the backend)."""
        return self._served.get(kind, 0)

    async def chat(
        self,
        endpoint: ModelEndpoint,
        prompt: str,
        images: list[bytes],
        *,
        prompt_id: PromptId,
        temperature: float = 0.0,
        json_schema: dict[str, Any] | None = None,
        position: int | None = None,
    ) -> str:
        self.calls.append((prompt_id.value, prompt))
        kind = chat_kind(prompt_id)
        if kind == SCORE_KIND:
            verdict: ScriptedVerdict = self._next(kind, self._scenario.verdicts, position)
            return verdict.reply()
        if prompt_id == PromptId.SUMMARY:
            return str(self._next(kind, self._scenario.summaries, position))
        if prompt_id == PromptId.CAPTION:
            return str(self._next(kind, self._scenario.captions, position))
        return str(self._next(kind, self._scenario.judge_replies, position))

    async def embed(
        self,
        endpoint: ModelEndpoint,
        items: list[MediaItem],
        *,
        position: int | None = None,
    ) -> list[list[float]]:
        dim = self._scenario.embedding_dim
        kind = endpoint.role.value
        if endpoint.role == Role.IMAGE_EMBEDDER:
            scripted = self._scenario.image_embeddings
            if scripted is None:
                return [digest_vector(item, dim) for item in items]
            vectors = []
            for offset, item in enumerate(items):
                index = self._position(kind, None if position is None else position + offset)
                if index < len(scripted):
                    self._served[kind] = self._served.get(kind, 0) + 1
                    vectors.append(list(scripted[index]))
                else:
                    vectors.append(digest_vector(item, dim))
            return vectors

        batches = self._scenario.joint_embeddings
        if batches is None:
            return [digest_vector(item, dim) for item in items]
        index = self._position(kind, position)
        if index < len(batches):
            self._served[kind] = self._served.get(kind, 0) + 1
            return [list(v) for v in batches[index]]
        return [digest_vector(item, dim) for item in items]
