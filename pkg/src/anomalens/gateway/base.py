"""Backend interface and error types for the model gateway."""

from abc import ABC, abstractmethod
from typing import Any

from anomalens.gateway.models import ModelEndpoint
from anomalens.gateway.prompts import PromptId

MediaItem = bytes | str

SCORE_KIND = "score"


def chat_kind(prompt_id: PromptId) -> str:
    """Replay kind of a chat request; both scorer prompts share one reply list."""
    if prompt_id in (PromptId.SCORE, PromptId.SCORE_CTX):
        return SCORE_KIND
    return prompt_id.value


CHAT_KINDS = frozenset(chat_kind(p) for p in PromptId)


class GatewayError(Exception):
    """Base exception for model gateway failures."""

    pass


class TransportError(GatewayError):
    """Network or server failure; safe to retry."""

    pass


class GatewayConfigError(GatewayError):
    """Endpoint misconfiguration, e.g. an embedding dimension that changed between calls."""

    pass


class FrameDecodeError(GatewayError):
    """Media that cannot be decoded as an image."""

    pass


class ScriptExhaustedError(GatewayError):
    """The scripted backend has no reply left for a role."""

    pass


class VerdictParseError(GatewayError):
    """Scorer output without a parseable anomaly flag."""

    def __init__(self, message: str, raw_text: str) -> None:
        super().__init__(message)
        self.raw_text = raw_text


class ModelBackend(ABC):
    """Transport for raw model calls; the gateway adds caching, parsing and retries on top."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Backend name identifier."""
        pass

    def replays_in_order(self, kind: str) -> bool:
        """
        True when replies of ``kind`` depend on request order rather than content.

        The gateway then numbers those requests and makes the number part of the
        cache key, so a cache hit never shifts the replies of later requests.
        """
        return False

    @abstractmethod
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
        """
        Run one chat completion.

        Args:
            endpoint: The endpoint to call
            prompt: Fully rendered user prompt
            images: Encoded images attached to the message, in order
            prompt_id: Template the prompt was rendered from
            temperature: Sampling temperature
            json_schema: Schema for constrained decoding, when supported
            position: Request number within its kind, for backends that replay in order

        Returns:
            The raw reply text
        """
        pass

    @abstractmethod
    async def embed(
        self,
        endpoint: ModelEndpoint,
        items: list[MediaItem],
        *,
        position: int | None = None,
    ) -> list[list[float]]:
        """
        Embed images (bytes) and/or texts (str).

        Returns:
            One raw vector per item, in order
        """
        pass

    async def close(self) -> None:
        """Release transport resources."""
        pass
