"""Endpoint and verdict models for the model gateway."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Role(str, Enum):
    """Role an external model plays in the pipeline."""

    SCORER = "scorer"
    CAPTIONER = "captioner"
    IMAGE_EMBEDDER = "image_embedder"
    JOINT_EMBEDDER = "joint_embedder"
    JUDGE = "judge"


class ModelEndpoint(BaseModel):
    """An OpenAI-compatible endpoint serving one model role."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    base_url: str
    model_name: str
    role: Role
    timeout: float = Field(default=120.0, gt=0.0)  # seconds
    max_retries: int = Field(default=3, ge=0)
    structured_output: bool = False  # JSON-schema constrained decoding supported

    @model_validator(mode="after")
    def _judge_retry_limit(self) -> "ModelEndpoint":
        if self.role == Role.JUDGE and self.max_retries > 3:
            raise ValueError("judge endpoints allow at most 3 retries")
        return self


class SegmentVerdict(BaseModel):
    """Scorer output for one segment: binary flag plus explanation."""

    segment_index: int = Field(ge=0)
    flag: int = Field(ge=0, le=1)
    explanation: str
    used_summary: bool = False
    summary_snapshot: str | None = None

    @model_validator(mode="after")
    def _snapshot_when_used(self) -> "SegmentVerdict":
        if self.used_summary and self.summary_snapshot is None:
            raise ValueError("used_summary requires summary_snapshot")
        return self
