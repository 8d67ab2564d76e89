"""Cost primitives: semantic cost, pairwise distances, min-max normalization."""

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .types import CostMatrix, DistanceMatrix, FeatureMatrix, FloatArray, InputError, PointSet3D


def cosine_similarity(featA: FeatureMatrix, featB: FeatureMatrix) -> FloatArray:
    """Cosine similarity between every source and target row, clipped to [-1, 1]."""
    if featA.dim != featB.dim:
        raise InputError(f"Feature dims differ: {featA.dim} vs {featB.dim}")
    sim = featA.normalized() @ featB.normalized().T
    return np.clip(sim, -1.0, 1.0)


def semantic_cost(featA: FeatureMatrix, featB: FeatureMatrix) -> CostMatrix:
    """C_sem[i, j] = 1 - cos(A_i, B_j); invariant to positive rescaling of rows."""
    return CostMatrix(1.0 - cosine_similarity(featA, featB), kind="semantic")


def pairwise_distances(points: PointSet3D) -> DistanceMatrix:
    """Euclidean distance matrix; symmetric with an exact zero diagonal."""
    return DistanceMatrix(squareform(pdist(points.points, metric="euclidean")))


def minmax_normalize(cost: CostMatrix) -> CostMatrix:
    """Rescale to [0, 1]; a constant matrix maps to all zeros."""
    data = cost.data
    if data.size == 0:
        raise InputError("Cannot normalize an empty cost matrix")
    lo = float(data.min())
    span = float(data.max()) - lo
    if span == 0.0:
        return CostMatrix(np.zeros_like(data), kind=cost.kind)
    return CostMatrix(np.clip((data - lo) / span, 0.0, 1.0), kind=cost.kind)
