"""Abstract base class and record types for the model response cache."""

import hashlib
import json
from abc import ABC, abstractmethod
from collections.abc import Iterable
from datetime import datetime, timezone
from typing import Any

from pydantic import BaseModel, Field

from anomalens.gateway.models import Role

CachedResponse = str | list[list[float]]


def sha256_hex(data: bytes | str) -> str:
    """Hex sha256 of bytes or UTF-8 text."""
    raw = data.encode("utf-8") if isinstance(data, str) else data
    return hashlib.sha256(raw).hexdigest()


class CacheKey(BaseModel):
    """Content hash over role, model name, rendered prompt and attached media digests."""

    digest: str

    @classmethod
    def build(
        cls,
        role: Role,
        model_name: str,
        prompt: str,
        media: list[bytes | str],
        attempt: int = 0,
        position: int | None = None,
    ) -> "CacheKey":
        h = hashlib.sha256()
        for part in (role.value, model_name, prompt):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        for item in media:
            # Tag text and image items so b"x" and "x" hash differently.
            tag = "t:" if isinstance(item, str) else "b:"
            h.update((tag + sha256_hex(item)).encode("ascii"))
            h.update(b"\x00")
        # Repeated attempts at an identical request are cached separately.
        if attempt:
            h.update(f"attempt:{attempt}".encode("ascii"))
        # Order-replayed requests are distinct per position.
        if position is not None:
            h.update(f"position:{position}".encode("ascii"))
        return cls(digest=h.hexdigest())


class CacheRecord(BaseModel):
    """One cached model response."""

    key: str
    role: Role
    model: str
    request_digest: str
    response: CachedResponse
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    def to_line(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


class ResponseCache(ABC):
    """Abstract interface for the model response cache."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Backend name identifier."""
        pass

    async def connect(self) -> None:
        """Open underlying resources."""
        pass

    @abstractmethod
    async def get(self, role: Role, key: CacheKey) -> CacheRecord | None:
        """Get a cached record, or None on a miss."""
        pass

    @abstractmethod
    async def put(self, record: CacheRecord) -> None:
        """Store a record; an existing record with the same key is kept."""
        pass

    @abstractmethod
    async def flush(self) -> None:
        """Drop every cached response."""
        pass

    async def close(self) -> None:
        """Release resources."""
        pass

    async def digests(self) -> dict[str, str]:
        """Content digest per role of the records held; empty when the backend cannot enumerate."""
        return {}


def digest_records(records: Iterable[CacheRecord]) -> str:
    """Order-independent digest over record keys and responses (timestamps excluded)."""
    lines = sorted(
        f"{r.key}:{sha256_hex(json.dumps(r.response, sort_keys=True))}" for r in records
    )
    return sha256_hex("\n".join(lines))
