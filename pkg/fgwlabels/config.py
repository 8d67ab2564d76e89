"""Configuration models and defaults for solver, anchors, pipeline and scenarios."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

# Defaults used by the CLI and the synthetic suites
DEFAULT_RHO = 0.75
DEFAULT_EPSILON = 1.0
DEFAULT_MAX_ITERS = 1000
DEFAULT_TOL = 1e-9
DEFAULT_ALPHA = 0.3
DEFAULT_ANCHORS = 64
DEFAULT_QUANTILE = 0.01
DEFAULT_THRESHOLD_FLOOR = 1e-9
DEFAULT_STAGES = 5
DEFAULT_TOPK = 3
DEFAULT_BETA = 0.5
DEFAULT_RADIUS = 0.1

SolverVariant = Literal["balanced", "uot_textbook", "uot_paper_pseudocode"]
AnchorRanking = Literal["confidence", "combined"]
ScenarioKind = Literal["rigid", "noisy", "mirror_alias", "partial_overlap", "broken_structure"]

SCENARIO_KINDS: tuple[ScenarioKind, ...] = (
    "rigid",
    "noisy",
    "mirror_alias",
    "partial_overlap",
    "broken_structure",
)


class SolverConfig(BaseModel):
    """Entropic solver settings; rho is the marginal relaxation, epsilon the entropic weight."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rho: float = Field(DEFAULT_RHO, gt=0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    max_iters: int = Field(DEFAULT_MAX_ITERS, ge=1)
    tol: float = Field(DEFAULT_TOL, gt=0)
    variant: SolverVariant = "uot_textbook"
    record_every: int = Field(0, ge=0)  # 0 disables the dual trace


class FusionConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    alpha: float = Field(DEFAULT_ALPHA, ge=0, le=1)


class AnchorConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = Field(DEFAULT_ANCHORS, ge=1)
    quantile: float = Field(DEFAULT_QUANTILE, gt=0, lt=1)
    floor: float = Field(DEFAULT_THRESHOLD_FLOOR, ge=0)
    ranking: AnchorRanking = "confidence"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    iters_T: int = Field(DEFAULT_STAGES, ge=1)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    anchor: AnchorConfig = Field(default_factory=AnchorConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    topk: int = Field(DEFAULT_TOPK, ge=1)
    relaxed_cc: bool = True
    # Stage 0 solves on the min-max normalized semantic cost so alpha = 0 reproduces it
    normalize_initial_cost: bool = True


class SoftTargetConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    beta: float = Field(DEFAULT_BETA, ge=0, le=1)


class Scenario(BaseModel):
    """Synthetic pair generator settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ScenarioKind
    n_points: int = Field(ge=4)
    seed: int = Field(0, ge=0, lt=2**64)
    feature_dim: int = Field(16, ge=2)
    noise_sigma: float = Field(0.0, ge=0)  # 3D jitter on target points
    overlap_fraction: float = Field(1.0, gt=0, le=1)
    alias_fraction: float = Field(0.8, ge=0, le=1)
    feature_noise: float = Field(0.0, ge=0)  # per-side feature perturbation
    feature_freq: float = Field(3.0, gt=0)
    bend: float = Field(0.5, ge=0)
