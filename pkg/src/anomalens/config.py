"""Configuration management for anomalens."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from anomalens.gateway.models import ModelEndpoint, Role

CANONICAL_LABELS: tuple[str, ...] = (
    "abuse",
    "arrest",
    "arson",
    "assault",
    "burglary",
    "explosion",
    "fighting",
    "roadaccidents",
    "robbery",
    "shoplifting",
    "shooting",
    "stealing",
    "vandalism",
)


class ConfigError(Exception):
    """Raised when a pipeline configuration cannot be loaded or fails validation."""

    pass


class Settings(BaseSettings):
    """Process settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="ANOMALENS_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = "INFO"
    log_format: str = "json"

    # Credentials for HTTP model endpoints (env only, never written to run artifacts)
    api_key: str = ""

    # Redis response cache
    redis_url: str = ""
    redis_password: str = ""

    # Dataset fan-out
    max_concurrent_videos: int = 4


@lru_cache
def get_settings() -> Settings:
    """Get cached process settings."""
    return Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True, allow_inf_nan=False)


class VideoConfig(_Section):
    """Segmentation of source frames into scoring units."""

    segment_len: int = Field(default=16, ge=1)
    frames_per_segment: int = Field(default=8, ge=1)


class CeaConfig(_Section):
    """Context-aware scoring: memory, key frames, summary schedule and grounding gate."""

    mode: Literal["gated", "ungated", "none"] = "gated"
    history_capacity: int = Field(default=8, ge=1)
    key_frames: int = Field(default=4, ge=1)
    stride: int = Field(default=5, ge=1)
    min_history: int = Field(default=3, ge=1)
    temperature: float = Field(default=0.1, gt=0.0)
    top_k_mean: int = Field(default=4, ge=1)
    sim_threshold: float = Field(default=0.30, ge=0.0, le=1.0)
    ent_threshold: float = Field(default=0.80, ge=0.0, le=1.0)


class ReaConfig(_Section):
    """Evidence field coefficients and recursive window proposal parameters."""

    alpha: float = 0.90
    gamma: float = 0.05
    delta: float = 0.25
    use_text_evidence: bool = True
    peak_threshold: float = Field(default=0.8, ge=0.0, le=1.0)
    mean_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    min_window: int = Field(default=2, ge=1)
    max_depth: int = Field(default=8, ge=0)
    merge_gap: int = Field(default=1, ge=0)
    max_intervals: int = Field(default=6, ge=1)

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """Effective (alpha, gamma, delta), with text evidence optionally switched off."""
        if not self.use_text_evidence:
            return (self.alpha, 0.0, 0.0)
        return (self.alpha, self.gamma, self.delta)


class ExplainerConfig(_Section):
    max_representatives: int = Field(default=10, ge=1, le=10)


class MetricsConfig(_Section):
    smooth_sigma: float = 16.0
    binarize_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    event_threshold: float = Field(default=0.5, ge=0.0, le=1.0)


class JudgeConfig(_Section):
    enabled: bool = True
    labels: list[str] = Field(default_factory=lambda: list(CANONICAL_LABELS))


def _default_endpoints() -> list[ModelEndpoint]:
    return [
        ModelEndpoint(
            base_url="http://localhost:8000/v1", model_name="InternVL2-8B", role=Role.SCORER
        ),
        ModelEndpoint(
            base_url="http://localhost:8000/v1", model_name="InternVL2-8B", role=Role.CAPTIONER
        ),
        ModelEndpoint(
            base_url="http://localhost:8001/v1", model_name="resnet50", role=Role.IMAGE_EMBEDDER
        ),
        ModelEndpoint(
            base_url="http://localhost:8002/v1",
            model_name="clip-vit-b-32",
            role=Role.JOINT_EMBEDDER,
        ),
        ModelEndpoint(
            base_url="http://localhost:11434/v1",
            model_name="gpt-oss:20b",
            role=Role.JUDGE,
            structured_output=True,
        ),
    ]


class GatewayConfig(_Section):
    """Model backends and response caching."""

    backend: Literal["http", "scripted"] = "http"
    cache: Literal["jsonl", "memory", "redis"] = "jsonl"
    cache_dir: Path = Path("cache")
    endpoints: list[ModelEndpoint] = Field(default_factory=_default_endpoints)

    @model_validator(mode="after")
    def _unique_roles(self) -> GatewayConfig:
        roles = [endpoint.role for endpoint in self.endpoints]
        duplicates = {role.value for role in roles if roles.count(role) > 1}
        if duplicates:
            raise ValueError(f"duplicate endpoint roles: {sorted(duplicates)}")
        return self

    def endpoint(self, role: Role) -> ModelEndpoint | None:
        """Get the endpoint configured for a role."""
        for endpoint in self.endpoints:
            if endpoint.role == role:
                return endpoint
        return None


class PipelineConfig(_Section):
    """Full pipeline configuration; every field has a default."""

    video: VideoConfig = Field(default_factory=VideoConfig)
    cea: CeaConfig = Field(default_factory=CeaConfig)
    rea: ReaConfig = Field(default_factory=ReaConfig)
    explainer: ExplainerConfig = Field(default_factory=ExplainerConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    judge: JudgeConfig = Field(default_factory=JudgeConfig)
    gateway: GatewayConfig = Field(default_factory=GatewayConfig)
    seed: int = 0

    @model_validator(mode="after")
    def _cross_field(self) -> PipelineConfig:
        if self.cea.top_k_mean > self.video.frames_per_segment:
            raise ValueError("cea.top_k_mean must not exceed video.frames_per_segment")
        if self.cea.key_frames > self.cea.history_capacity:
            raise ValueError("cea.key_frames must not exceed cea.history_capacity")
        return self


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{path}: {item['msg']}")
    return "; ".join(parts)


def config_from_dict(data: dict[str, Any]) -> PipelineConfig:
    """Validate a raw mapping into a PipelineConfig."""
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def load_yaml_config(path: Path) -> dict[str, Any]:
    """Load a YAML configuration file."""
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path: Path | None = None) -> PipelineConfig:
    """
    Load the pipeline configuration.

    Args:
        path: YAML file to load; None yields the defaults

    Returns:
        The validated configuration
    """
    if path is None:
        return PipelineConfig()
    try:
        data = load_yaml_config(path)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    return config_from_dict(data)


def dump_config(config: PipelineConfig) -> dict[str, Any]:
    """Serialize a configuration to plain JSON-compatible data."""
    return config.model_dump(mode="json")


def override_config(config: PipelineConfig, overrides: dict[str, Any]) -> PipelineConfig:
    """
    Apply dotted-path overrides such as ``{"cea.sim_threshold": 0.2}``.

    The result is re-validated as a whole, so unknown paths and invariant
    violations raise ConfigError.
    """
    data = dump_config(config)
    for dotted, value in overrides.items():
        node = data
        keys = dotted.split(".")
        for key in keys[:-1]:
            child = node.get(key)
            if not isinstance(child, dict):
                raise ConfigError(f"{dotted}: unknown configuration section {key!r}")
            node = child
        if keys[-1] not in node:
            raise ConfigError(f"{dotted}: unknown configuration key")
        node[keys[-1]] = value
    return config_from_dict(data)
