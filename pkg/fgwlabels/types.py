"""Type definitions for FGW pseudo-label generation."""

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

CostKind = Literal["semantic", "geometric", "fused"]

# (source index, target index, score)
Match = tuple[int, int, float]

SYMMETRY_TOL = 1e-12
NORM_TOL = 1e-12


class FGWError(ValueError):
    """Root of every error raised on purpose by this package."""


class InputError(FGWError):
    """Rejected input: shapes, non-finite values, zero-norm rows, bad marginals."""


class SizeGuardError(FGWError):
    """An exact oracle was asked for an instance above its size guard."""


class AnchorSelectionError(FGWError):
    """No cycle-consistent anchor survived the threshold."""


class FormatError(FGWError):
    """A file does not follow the bundle / plan / labels layout."""


def _frozen_array(values: Any, ndim: int, name: str) -> FloatArray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise InputError(f"{name}: expected {ndim}-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteMeasure:
    mass: FloatArray  # length n, nonnegative

    def __post_init__(self) -> None:
        mass = _frozen_array(self.mass, 1, "DiscreteMeasure")
        if np.any(mass < 0):
            raise InputError("DiscreteMeasure: negative mass")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasure":
        if n < 1:
            raise InputError(f"DiscreteMeasure: need at least one point, got {n}")
        return cls(np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return int(self.mass.shape[0])

    @property
    def total(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class FeatureMatrix:
    data: FloatArray  # n x d embedding rows

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 2, "FeatureMatrix")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InputError(f"FeatureMatrix: empty shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def normalized(self) -> FloatArray:
        """Row-normalized view; zero rows mean upstream extraction failed and are rejected."""
        norms = np.linalg.norm(self.data, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise InputError(f"FeatureMatrix: zero-norm rows {zero[:10].tolist()}")
        return self.data / norms[:, None]


@dataclass(frozen=True)
class PointSet3D:
    points: FloatArray  # n x 3

    def __post_init__(self) -> None:
        points = _frozen_array(self.points, 2, "PointSet3D")
        if points.shape[1] != 3 or points.shape[0] < 1:
            raise InputError(f"PointSet3D: expected n x 3 with n >= 1, got {points.shape}")
        object.__setattr__(self, "points", points)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class CostMatrix:
    data: FloatArray  # n x m, nonnegative
    kind: CostKind

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 2, "CostMatrix")
        if data.size and data.min() < 0:
            raise InputError("CostMatrix: negative entries")
        if self.kind == "semantic" and data.size and data.max() > 2.0:
            raise InputError("CostMatrix: semantic cost above cosine-distance range")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])


@dataclass(frozen=True)
class DistanceMatrix:
    data: FloatArray  # n x n, symmetric, zero diagonal

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 2, "DistanceMatrix")
        if data.shape[0] != data.shape[1]:
            raise InputError(f"DistanceMatrix: not square {data.shape}")
        if np.any(np.diag(data) != 0.0):
            raise InputError("DistanceMatrix: nonzero diagonal")
        if np.any(data < 0) or not np.allclose(data, data.T, rtol=0.0, atol=SYMMETRY_TOL):
            raise InputError("DistanceMatrix: negative or asymmetric entries")
        object.__setattr__(self, "data", data)

    @property
    def size(self) -> int:
        return int(self.data.shape[0])


@dataclass(frozen=True)
class TransportPlan:
    data: FloatArray  # n x m coupling
    solver: str = "none"
    iteration: int = 0
    objective: float = float("nan")
    detached: bool = False  # treated as a constant by loss gradients

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 2, "TransportPlan")
        if np.any(data < 0):
            raise InputError("TransportPlan: negative entries")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])


@dataclass(frozen=True)
class PairProblem:
    featA: FeatureMatrix
    featB: FeatureMatrix
    ptsA: PointSet3D
    ptsB: PointSet3D
    massA: DiscreteMeasure
    massB: DiscreteMeasure

    def __post_init__(self) -> None:
        n, m = self.featA.rows, self.featB.rows
        if self.featA.dim != self.featB.dim:
            raise InputError(f"PairProblem: feature dims {self.featA.dim} != {self.featB.dim}")
        if self.ptsA.size != n or self.massA.size != n:
            raise InputError("PairProblem: source features, points and masses disagree in size")
        if self.ptsB.size != m or self.massB.size != m:
            raise InputError("PairProblem: target features, points and masses disagree in size")

    @classmethod
    def uniform(
        cls, featA: FeatureMatrix, featB: FeatureMatrix, ptsA: PointSet3D, ptsB: PointSet3D
    ) -> "PairProblem":
        return cls(
            featA,
            featB,
            ptsA,
            ptsB,
            DiscreteMeasure.uniform(featA.rows),
            DiscreteMeasure.uniform(featB.rows),
        )

    @property
    def n(self) -> int:
        return self.featA.rows

    @property
    def m(self) -> int:
        return self.featB.rows

    @property
    def d(self) -> int:
        return self.featA.dim


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations_used: int
    final_potential_change: float
    row_marginal_err: float  # L1 distance of the plan's row sums to a
    col_marginal_err: float
    transported_mass: float
    converged: bool
    variant: str
    dual_trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class AnchorSet:
    pairs: tuple[tuple[int, int], ...]
    confidence: FloatArray  # plan value at each pair
    cycle_error: FloatArray  # 3D round-trip displacement in source space
    threshold: float  # delta used for the selection
    shortfall: bool = False  # fewer than the requested K

    def __post_init__(self) -> None:
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        confidence = _frozen_array(self.confidence, 1, "AnchorSet.confidence")
        cycle_error = _frozen_array(self.cycle_error, 1, "AnchorSet.cycle_error")
        if not len(pairs) == confidence.shape[0] == cycle_error.shape[0]:
            raise InputError("AnchorSet: pairs, confidence and cycle_error lengths differ")
        if any(i < 0 or j < 0 for i, j in pairs):
            raise InputError("AnchorSet: negative index")
        if len({i for i, _ in pairs}) != len(pairs) or len({j for _, j in pairs}) != len(pairs):
            raise InputError("AnchorSet: a source or target is used twice")
        if np.any(cycle_error < 0) or np.any(cycle_error > self.threshold):
            raise InputError("AnchorSet: cycle error outside [0, threshold]")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "confidence", confidence)
        object.__setattr__(self, "cycle_error", cycle_error)

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> IntArray:
        return np.array([i for i, _ in self.pairs], dtype=np.int64)

    @property
    def targets(self) -> IntArray:
        return np.array([j for _, j in self.pairs], dtype=np.int64)

    @property
    def mean_cycle_error(self) -> float:
        return float(self.cycle_error.mean()) if self.pairs else 0.0


@dataclass(frozen=True)
class PseudoLabels:
    hard: BoolArray  # n x m multi-hot target
    candidates: tuple[tuple[tuple[int, float], ...], ...]  # kept (target, plan value) per source
    proposed: tuple[tuple[tuple[int, float], ...], ...]  # forward top-k before filtering
    kept_mask: BoolArray  # source survived relaxed cycle consistency
    k: int

    def __post_init__(self) -> None:
        hard = np.array(self.hard, dtype=np.bool_, copy=True)
        kept = np.array(self.kept_mask, dtype=np.bool_, copy=True)
        if hard.ndim != 2 or kept.shape != (hard.shape[0],) or len(self.candidates) != len(kept):
            raise InputError("PseudoLabels: inconsistent shapes")
        for i, row in enumerate(self.candidates):
            targets = sorted(j for j, _ in row)
            if len(row) > self.k or targets != np.flatnonzero(hard[i]).tolist():
                raise InputError(f"PseudoLabels: row {i} disagrees with its candidates")
            if bool(row) != bool(kept[i]):
                raise InputError(f"PseudoLabels: row {i} kept flag disagrees with candidates")
        hard.setflags(write=False)
        kept.setflags(write=False)
        object.__setattr__(self, "hard", hard)
        object.__setattr__(self, "kept_mask", kept)

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.hard.shape[0]), int(self.hard.shape[1])

    def matches(self) -> list[Match]:
        """Every kept (source, target, plan value), best candidate first within a row."""
        return [(i, j, v) for i, row in enumerate(self.candidates) for j, v in row]


@dataclass(frozen=True)
class SimilarityMatrix:
    data: FloatArray  # n x m cosine similarities
    tau: float  # temperature

    def __post_init__(self) -> None:
        data = _frozen_array(self.data, 2, "SimilarityMatrix")
        if not self.tau > 0:
            raise InputError(f"SimilarityMatrix: temperature must be positive, got {self.tau}")
        if data.size and (data.min() < -1.0 - NORM_TOL or data.max() > 1.0 + NORM_TOL):
            raise InputError("SimilarityMatrix: entries outside [-1, 1]")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])


@dataclass(frozen=True)
class LossReport:
    value: float
    grad_S: FloatArray
    grad_tau: float


@dataclass(frozen=True)
class GroundTruth:
    assignment: Mapping[int, int]  # partial injective source -> target map
    unmatched_sources: frozenset[int] = field(default_factory=frozenset)
    unmatched_targets: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        assignment = {int(i): int(j) for i, j in self.assignment.items()}
        if len(set(assignment.values())) != len(assignment):
            raise InputError("GroundTruth: assignment is not injective")
        unmatched_s = frozenset(int(i) for i in self.unmatched_sources)
        unmatched_t = frozenset(int(j) for j in self.unmatched_targets)
        if unmatched_s & assignment.keys() or unmatched_t & set(assignment.values()):
            raise InputError("GroundTruth: unmatched indices overlap the assignment")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "unmatched_sources", unmatched_s)
        object.__setattr__(self, "unmatched_targets", unmatched_t)

    def to_dict(self) -> dict[str, Any]:
        return {
            "assignment": [[i, j] for i, j in sorted(self.assignment.items())],
            "unmatched_sources": sorted(self.unmatched_sources),
            "unmatched_targets": sorted(self.unmatched_targets),
        }


# Per-stage record of one pipeline run
@dataclass(frozen=True)
class StageDiagnostics:
    stage: int
    objective: float
    row_marginal_err: float
    col_marginal_err: float
    transported_mass: float
    iterations_used: int
    converged: bool
    anchor_count: int = 0
    anchor_mean_cycle_error: float = 0.0
    anchor_shortfall: bool = False
    fallback: bool = False  # anchors failed, stage re-solved on the semantic cost

    def to_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "objective": self.objective,
            "row_marginal_err": self.row_marginal_err,
            "col_marginal_err": self.col_marginal_err,
            "transported_mass": self.transported_mass,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "anchor_count": self.anchor_count,
            "anchor_mean_cycle_error": self.anchor_mean_cycle_error,
            "anchor_shortfall": self.anchor_shortfall,
            "fallback": self.fallback,
        }


# Evaluation output against synthetic ground truth
@dataclass(frozen=True)
class Metrics:
    precision: float | None  # None when nothing was emitted
    recall: float
    accuracy: float
    emitted: int
    assigned: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "emitted": self.emitted,
            "assigned": self.assigned,
        }
