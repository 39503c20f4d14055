"""In-memory response cache for tests and one-shot runs."""

import structlog

from anomalens.cache.base import CacheKey, CacheRecord, ResponseCache, digest_records
from anomalens.gateway.models import Role

logger = structlog.get_logger(__name__)


class MemoryResponseCache(ResponseCache):
    """Process-local cache (lost on exit)."""

    def __init__(self) -> None:
        self._records: dict[tuple[Role, str], CacheRecord] = {}

    @property
    def name(self) -> str:
        return "memory"

    async def get(self, role: Role, key: CacheKey) -> CacheRecord | None:
        return self._records.get((role, key.digest))

    async def put(self, record: CacheRecord) -> None:
        self._records.setdefault((record.role, record.key), record)

    async def flush(self) -> None:
        self._records.clear()

    async def digests(self) -> dict[str, str]:
        roles = sorted({role for role, _ in self._records}, key=lambda r: r.value)
        return {
            role.value: digest_records(r for (rl, _), r in self._records.items() if rl == role)
            for role in roles
        }

    def __len__(self) -> int:
        return len(self._records)
