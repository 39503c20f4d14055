"""Models for evidence aggregation: the evidence field and anomaly windows."""

from pydantic import BaseModel, ConfigDict, Field, model_validator


class EvidenceField(BaseModel):
    """Continuous per-segment evidence scores, clipped to [0, 1]."""

    model_config = ConfigDict(frozen=True)

    scores: tuple[float, ...]
    alpha: float = 0.90
    gamma: float = 0.05
    delta: float = 0.25

    @model_validator(mode="after")
    def _clipped(self) -> "EvidenceField":
        if any(not 0.0 <= s <= 1.0 for s in self.scores):
            raise ValueError("evidence scores must lie in [0, 1]")
        return self

    def __len__(self) -> int:
        return len(self.scores)


class Window(BaseModel):
    """Inclusive segment range [l, r] with its evidence statistics."""

    model_config = ConfigDict(frozen=True)

    l: int = Field(ge=0)  # noqa: E741
    r: int = Field(ge=0)
    mean: float
    peak: float
    cumulative: float

    @model_validator(mode="after")
    def _ordered(self) -> "Window":
        if self.r < self.l:
            raise ValueError(f"window end {self.r} precedes start {self.l}")
        return self

    @property
    def length(self) -> int:
        return self.r - self.l + 1

    @property
    def bounds(self) -> tuple[int, int]:
        return (self.l, self.r)


class IntervalSet(BaseModel):
    """Selected anomaly windows, sorted by start."""

    windows: list[Window] = Field(default_factory=list)
    max_intervals: int = Field(default=6, ge=1)

    @model_validator(mode="after")
    def _sorted_bounded(self) -> "IntervalSet":
        if len(self.windows) > self.max_intervals:
            raise ValueError("more windows than max_intervals")
        starts = [w.l for w in self.windows]
        if starts != sorted(starts):
            raise ValueError("windows must be sorted by start")
        return self

    def __len__(self) -> int:
        return len(self.windows)

    def bounds(self) -> list[tuple[int, int]]:
        return [w.bounds for w in self.windows]
