"""
Record models and JSON schemas for every text record the CLI writes.

Headers of the binary files, the labels file and the diagnostics / metrics
lines are all pydantic models; get_all_schemas() renders them for
`fgw-labels schema`.
"""

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .config import Scenario

FORMAT_VERSION = 1


class _Record(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GroundTruthRecord(_Record):
    assignment: list[tuple[int, int]]
    unmatched_sources: list[int] = Field(default_factory=list)
    unmatched_targets: list[int] = Field(default_factory=list)


class BundleHeader(_Record):
    format_version: Literal[1] = FORMAT_VERSION
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    d: int = Field(ge=1)
    flags: list[str] = Field(default_factory=list)
    scenario: Scenario | None = None
    ground_truth: GroundTruthRecord | None = None


class PlanHeader(_Record):
    format_version: Literal[1] = FORMAT_VERSION
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    solver: str
    stage: int = Field(ge=0)
    objective: float


class LabelRow(_Record):
    source: int = Field(ge=0)
    candidates: list[tuple[int, float]]  # kept after the mutual top-k filter
    proposed: list[tuple[int, float]]  # forward top-k


class LabelsRecord(_Record):
    format_version: Literal[1] = FORMAT_VERSION
    n: int = Field(ge=1)
    m: int = Field(ge=1)
    k: int = Field(ge=1)
    relaxed_cc: bool
    rows: list[LabelRow]


class StageRecord(_Record):
    stage: int = Field(ge=0)
    objective: float
    row_marginal_err: float
    col_marginal_err: float
    transported_mass: float
    iterations_used: int
    converged: bool
    anchor_count: int
    anchor_mean_cycle_error: float
    anchor_shortfall: bool
    fallback: bool


class MetricsRecord(_Record):
    method: str
    stage: int | None = None
    precision: float | None
    recall: float
    accuracy: float
    emitted: int
    assigned: int


def get_all_schemas() -> dict[str, dict[str, Any]]:
    """All schemas keyed by output file name."""
    return {
        "bundle-header.schema.json": BundleHeader.model_json_schema(),
        "plan-header.schema.json": PlanHeader.model_json_schema(),
        "labels.schema.json": LabelsRecord.model_json_schema(),
        "stage-diagnostics.schema.json": StageRecord.model_json_schema(),
        "metrics.schema.json": MetricsRecord.model_json_schema(),
    }
