"""Prometheus metrics for model traffic (the call ledger)."""

from collections.abc import Iterator
from contextlib import contextmanager
from time import perf_counter

from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, generate_latest

from anomalens.gateway.models import Role


class GatewayMetrics:
    """
    Counters for one run, held in a private registry.

    Requests count logical gateway operations (a cache hit is still a request);
    backend calls count transport attempts, including parse retries.
    """

    OPERATIONS: tuple[str, ...] = (
        "embed_image",
        "embed_joint",
        "score_segment",
        "summarize",
        "caption_event",
        "judge_category",
    )

    def __init__(self) -> None:
        self.registry = CollectorRegistry()
        self.requests = Counter(
            "anomalens_gateway_requests",
            "Logical gateway operations",
            ["role", "operation"],
            registry=self.registry,
        )
        self.backend_calls = Counter(
            "anomalens_backend_calls",
            "Backend call attempts",
            ["role", "outcome"],
            registry=self.registry,
        )
        self.cache_hits = Counter(
            "anomalens_cache_hits",
            "Responses served from the cache",
            ["role"],
            registry=self.registry,
        )
        self.call_seconds = Histogram(
            "anomalens_model_call_seconds",
            "Latency of backend calls",
            ["role"],
            registry=self.registry,
        )
        self.active_videos = Gauge(
            "anomalens_active_videos",
            "Videos currently in flight",
            registry=self.registry,
        )

    def record_request(self, role: Role, operation: str) -> None:
        self.requests.labels(role=role.value, operation=operation).inc()

    def record_cache_hit(self, role: Role) -> None:
        self.cache_hits.labels(role=role.value).inc()

    @contextmanager
    def backend_call(self, role: Role) -> Iterator[None]:
        """Time one backend attempt and count its outcome."""
        start = perf_counter()
        try:
            yield
        except Exception:
            self.backend_calls.labels(role=role.value, outcome="error").inc()
            raise
        else:
            self.backend_calls.labels(role=role.value, outcome="ok").inc()
        finally:
            self.call_seconds.labels(role=role.value).observe(perf_counter() - start)

    def _sample(self, name: str, labels: dict[str, str]) -> int:
        value = self.registry.get_sample_value(name, labels)
        return int(value or 0)

    def ledger(self) -> dict[str, int]:
        """Logical requests per gateway operation."""
        totals = dict.fromkeys(self.OPERATIONS, 0)
        for metric in self.requests.collect():
            for sample in metric.samples:
                if sample.name == "anomalens_gateway_requests_total":
                    totals[sample.labels["operation"]] += int(sample.value)
        return totals

    def role_ledger(self) -> dict[str, int]:
        """Logical requests per model role."""
        totals = {role.value: 0 for role in Role}
        for metric in self.requests.collect():
            for sample in metric.samples:
                if sample.name == "anomalens_gateway_requests_total":
                    totals[sample.labels["role"]] += int(sample.value)
        return totals

    def backend_ledger(self) -> dict[str, int]:
        """Successful backend calls per role."""
        return {
            role.value: self._sample(
                "anomalens_backend_calls_total", {"role": role.value, "outcome": "ok"}
            )
            for role in Role
        }

    def cache_ledger(self) -> dict[str, int]:
        return {
            role.value: self._sample("anomalens_cache_hits_total", {"role": role.value})
            for role in Role
        }

    def exposition(self) -> bytes:
        """Prometheus text exposition of every metric."""
        return generate_latest(self.registry)
