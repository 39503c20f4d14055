"""OpenAI-compatible HTTP backend for chat completions and embeddings."""

import base64
import io
from typing import Any

import httpx
import structlog
from PIL import Image
from tenacity import (
    AsyncRetrying,
    RetryCallState,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from anomalens.config import get_settings
from anomalens.gateway.base import MediaItem, ModelBackend, TransportError
from anomalens.gateway.models import ModelEndpoint
from anomalens.gateway.prompts import PromptId

logger = structlog.get_logger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}
MAX_BACKOFF_SECONDS = 30.0


class RetryableTransportError(TransportError):
    """Transport failure worth another attempt (timeout, connection error, 429, 5xx)."""


def image_data_url(image: bytes) -> str:
    """Encode an image as a base64 data URL with its detected MIME type."""
    with Image.open(io.BytesIO(image)) as img:
        mime = Image.MIME.get(img.format or "", "application/octet-stream")
    encoded = base64.b64encode(image).decode("ascii")
    return f"data:{mime};base64,{encoded}"


class HttpBackend(ModelBackend):
    """Backend talking to OpenAI-compatible servers (vLLM, ollama, LMDeploy, ...)."""

    def __init__(
        self,
        api_key: str | None = None,
        backoff_seconds: float = 1.0,
        transport: httpx.AsyncBaseTransport | None = None,
    ) -> None:
        """
        Initialize the HTTP backend.

        Args:
            api_key: Bearer credential; defaults to the ANOMALENS_API_KEY setting
            backoff_seconds: Base delay between retries, doubled on each attempt
            transport: Optional httpx transport shared by every client
        """
        self._api_key = api_key if api_key is not None else get_settings().api_key
        self._backoff = backoff_seconds
        self._transport = transport
        self._clients: dict[str, httpx.AsyncClient] = {}

    @property
    def name(self) -> str:
        return "http"

    def _client(self, endpoint: ModelEndpoint) -> httpx.AsyncClient:
        base_url = endpoint.base_url.rstrip("/")
        client = self._clients.get(base_url)
        if client is None:
            headers = {"Content-Type": "application/json"}
            if self._api_key:
                headers["Authorization"] = f"Bearer {self._api_key}"
            client = httpx.AsyncClient(
                base_url=base_url,
                headers=headers,
                timeout=httpx.Timeout(endpoint.timeout),
                transport=self._transport,
            )
            self._clients[base_url] = client
        return client

    async def _send(
        self, client: httpx.AsyncClient, endpoint: ModelEndpoint, path: str, payload: dict[str, Any]
    ) -> Any:
        """One POST; retryable failures raise RetryableTransportError."""
        try:
            response = await client.post(path, json=payload)
        except httpx.TimeoutException as e:
            raise RetryableTransportError(
                f"{endpoint.model_name}: request timed out after {endpoint.timeout}s"
            ) from e
        except httpx.RequestError as e:
            raise RetryableTransportError(f"{endpoint.model_name}: request failed: {e}") from e

        if response.status_code == 200:
            return response.json()
        error = f"{endpoint.model_name}: HTTP {response.status_code} - {response.text[:200]}"
        if response.status_code in RETRYABLE_STATUS:
            raise RetryableTransportError(error)
        logger.error("Model endpoint rejected request", path=path, error=error)
        raise TransportError(error)

    async def _post(self, endpoint: ModelEndpoint, path: str, payload: dict[str, Any]) -> Any:
        """POST with retries on transport failures and retryable status codes."""
        log = logger.bind(role=endpoint.role.value, model=endpoint.model_name, path=path)
        client = self._client(endpoint)

        def warn(state: RetryCallState) -> None:
            error = state.outcome.exception() if state.outcome else None
            log.warning("Retrying model request", attempt=state.attempt_number, error=str(error))

        retrying = AsyncRetrying(
            stop=stop_after_attempt(endpoint.max_retries + 1),
            wait=wait_exponential(multiplier=self._backoff, max=MAX_BACKOFF_SECONDS),
            retry=retry_if_exception_type(RetryableTransportError),
            before_sleep=warn,
            reraise=True,
        )
        return await retrying(self._send, client, endpoint, path, payload)

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
        content: list[dict[str, Any]] = [
            {"type": "image_url", "image_url": {"url": image_data_url(image)}} for image in images
        ]
        content.append({"type": "text", "text": prompt})

        payload: dict[str, Any] = {
            "model": endpoint.model_name,
            "messages": [{"role": "user", "content": content}],
            "temperature": temperature,
        }
        if json_schema is not None and endpoint.structured_output:
            payload["response_format"] = {
                "type": "json_schema",
                "json_schema": {"name": "reply", "schema": json_schema, "strict": True},
            }

        logger.debug(
            "Sending chat completion",
            model=endpoint.model_name,
            prompt_id=prompt_id.value,
            images=len(images),
        )
        data = await self._post(endpoint, "/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise TransportError(f"{endpoint.model_name}: malformed chat response") from e
        return str(text or "")

    async def embed(
        self, endpoint: ModelEndpoint, items: list[MediaItem], *, position: int | None = None
    ) -> list[list[float]]:
        inputs: list[Any] = [
            item
            if isinstance(item, str)
            else {"type": "image_url", "image_url": {"url": image_data_url(item)}}
            for item in items
        ]
        payload = {"model": endpoint.model_name, "input": inputs}

        data = await self._post(endpoint, "/embeddings", payload)
        try:
            rows = sorted(data["data"], key=lambda row: row["index"])
            vectors = [[float(x) for x in row["embedding"]] for row in rows]
        except (KeyError, TypeError, ValueError) as e:
            raise TransportError(f"{endpoint.model_name}: malformed embedding response") from e
        if len(vectors) != len(items):
            raise TransportError(
                f"{endpoint.model_name}: expected {len(items)} embeddings, got {len(vectors)}"
            )
        return vectors

    async def close(self) -> None:
        for client in self._clients.values():
            await client.aclose()
        self._clients.clear()
