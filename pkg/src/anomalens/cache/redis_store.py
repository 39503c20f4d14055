"""Redis response cache shared between processes."""

import redis.asyncio as redis
import structlog

from anomalens.cache.base import CacheKey, CacheRecord, ResponseCache
from anomalens.gateway.models import Role

logger = structlog.get_logger(__name__)


class RedisResponseCache(ResponseCache):
    """Records stored as JSON strings under ``anomalens:cache:<role>:<key>``."""

    KEY_PREFIX = "anomalens:cache:"

    def __init__(self, url: str = "redis://localhost:6379/0", password: str | None = None) -> None:
        """
        Initialize Redis response cache.

        Args:
            url: Redis connection URL
            password: Redis password (optional)
        """
        self._url = url
        self._password = password
        self._client: redis.Redis[str] | None = None

    @property
    def name(self) -> str:
        return "redis"

    async def connect(self) -> None:
        """Connect to Redis."""
        if self._client is None:
            self._client = redis.from_url(self._url, password=self._password, decode_responses=True)
            logger.info("Connected to Redis", url=self._url)

    async def close(self) -> None:
        """Disconnect from Redis."""
        if self._client:
            await self._client.close()
            self._client = None
            logger.info("Disconnected from Redis")

    def _key(self, role: Role, digest: str) -> str:
        return f"{self.KEY_PREFIX}{role.value}:{digest}"

    async def _require(self) -> "redis.Redis[str]":
        if self._client is None:
            await self.connect()
        assert self._client is not None
        return self._client

    async def get(self, role: Role, key: CacheKey) -> CacheRecord | None:
        client = await self._require()
        data = await client.get(self._key(role, key.digest))
        if data:
            return CacheRecord.model_validate_json(data)
        return None

    async def put(self, record: CacheRecord) -> None:
        client = await self._require()
        await client.set(self._key(record.role, record.key), record.model_dump_json(), nx=True)

    async def flush(self) -> None:
        client = await self._require()
        keys = [k async for k in client.scan_iter(match=f"{self.KEY_PREFIX}*")]
        if keys:
            await client.delete(*keys)
        logger.info("Flushed response cache", keys=len(keys))
