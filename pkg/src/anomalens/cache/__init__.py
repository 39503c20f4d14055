"""Response cache backends for model calls."""

from pathlib import Path
from typing import TYPE_CHECKING

from anomalens.cache.base import CacheKey, CacheRecord, ResponseCache
from anomalens.cache.jsonl import JsonlResponseCache
from anomalens.cache.memory import MemoryResponseCache
from anomalens.cache.redis_store import RedisResponseCache
from anomalens.config import get_settings

if TYPE_CHECKING:
    from anomalens.config import PipelineConfig

__all__ = [
    "CacheKey",
    "CacheRecord",
    "ResponseCache",
    "JsonlResponseCache",
    "MemoryResponseCache",
    "RedisResponseCache",
    "create_cache",
]


def create_cache(config: "PipelineConfig", directory: Path | None = None) -> ResponseCache:
    """
    Build the cache backend selected by ``gateway.cache``.

    Args:
        config: Pipeline configuration
        directory: Directory for the JSONL backend; defaults to ``gateway.cache_dir``
    """
    backend = config.gateway.cache
    if backend == "memory":
        return MemoryResponseCache()
    if backend == "redis":
        settings = get_settings()
        return RedisResponseCache(
            url=settings.redis_url or "redis://localhost:6379/0",
            password=settings.redis_password or None,
        )
    return JsonlResponseCache(directory or config.gateway.cache_dir)
