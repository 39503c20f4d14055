"""Append-only JSONL response cache, one file per model role."""

import asyncio
import json
from pathlib import Path

import structlog
from pydantic import ValidationError

from anomalens.cache.base import CacheKey, CacheRecord, ResponseCache, digest_records
from anomalens.gateway.models import Role

logger = structlog.get_logger(__name__)


class JsonlResponseCache(ResponseCache):
    """
    Persistent cache under ``<directory>/<role>.jsonl``.

    Files are read lazily on the first lookup for a role. Appends are serialised
    by a single asyncio.Lock, so concurrent videos can share one instance.
    """

    def __init__(self, directory: Path) -> None:
        self._directory = directory
        self._records: dict[Role, dict[str, CacheRecord]] = {}
        self._lock = asyncio.Lock()

    @property
    def name(self) -> str:
        return "jsonl"

    @property
    def directory(self) -> Path:
        return self._directory

    def path_for(self, role: Role) -> Path:
        return self._directory / f"{role.value}.jsonl"

    def _load(self, role: Role) -> dict[str, CacheRecord]:
        records = self._records.get(role)
        if records is not None:
            return records

        records = {}
        path = self.path_for(role)
        if path.exists():
            with path.open(encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = CacheRecord.model_validate_json(line)
                    except ValidationError as e:
                        # A torn trailing write is skipped rather than poisoning the cache.
                        logger.warning(
                            "Skipping unreadable cache line",
                            path=str(path),
                            line=lineno,
                            error=str(e).splitlines()[0],
                        )
                        continue
                    records.setdefault(record.key, record)
            logger.debug("Loaded response cache", role=role.value, records=len(records))
        self._records[role] = records
        return records

    async def get(self, role: Role, key: CacheKey) -> CacheRecord | None:
        return self._load(role).get(key.digest)

    async def put(self, record: CacheRecord) -> None:
        async with self._lock:
            records = self._load(record.role)
            if record.key in records:
                return
            records[record.key] = record
            self._directory.mkdir(parents=True, exist_ok=True)
            with self.path_for(record.role).open("a", encoding="utf-8") as f:
                f.write(json.dumps(record.to_line(), sort_keys=True) + "\n")

    async def flush(self) -> None:
        async with self._lock:
            for role in Role:
                self.path_for(role).unlink(missing_ok=True)
            self._records.clear()
        logger.info("Flushed response cache", directory=str(self._directory))

    async def digests(self) -> dict[str, str]:
        return {
            role.value: digest_records(self._load(role).values())
            for role in Role
            if self.path_for(role).exists()
        }
