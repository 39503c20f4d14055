"""Shared fixtures: synthetic frames, scripted gateways and configurations."""

import logging
from collections.abc import Callable, Iterator

import pytest
import structlog

from anomalens.cache import MemoryResponseCache
from anomalens.config import PipelineConfig, config_from_dict
from anomalens.gateway.client import ModelGateway, build_gateway
from anomalens.gateway.scripted import ScriptedScenario
from anomalens.synthetic import SyntheticFrameSource, render_frame
from anomalens.telemetry import GatewayMetrics

GatewayFactory = Callable[..., ModelGateway]


@pytest.fixture(autouse=True, scope="session")
def quiet_logging() -> Iterator[None]:
    """Render every log event but keep it off the captured streams."""
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.DEBUG),
        logger_factory=structlog.ReturnLoggerFactory(),
        cache_logger_on_first_use=False,
    )
    yield
    structlog.reset_defaults()


@pytest.fixture
def config() -> PipelineConfig:
    """Default configuration on the scripted backend with an in-memory cache."""
    return config_from_dict({"gateway": {"backend": "scripted", "cache": "memory"}})


@pytest.fixture
def frames() -> list[bytes]:
    """Eight distinct decodable frames (one segment's worth)."""
    return [render_frame("fixture", i) for i in range(8)]


@pytest.fixture
def make_gateway(config: PipelineConfig) -> GatewayFactory:
    """Build a scripted gateway with a fresh cache and ledger."""

    def factory(
        scenario: ScriptedScenario, cfg: PipelineConfig | None = None
    ) -> ModelGateway:
        return build_gateway(
            cfg or config, scenario, cache=MemoryResponseCache(), metrics=GatewayMetrics()
        )

    return factory


@pytest.fixture
def make_source() -> Callable[..., SyntheticFrameSource]:
    """Synthetic frame source of a given size."""

    def factory(
        frame_count: int, video_id: str = "Robbery001_x264", unreadable: set[int] | None = None
    ) -> SyntheticFrameSource:
        return SyntheticFrameSource(video_id, frame_count, unreadable)

    return factory
