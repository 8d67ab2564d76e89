"""Gromov-Wasserstein objective, anchor-linearized geometric cost, cost fusion."""

import math
from collections.abc import Iterator

import numpy as np

from .config import FusionConfig
from .types import (
    AnchorSet,
    CostMatrix,
    DistanceMatrix,
    FloatArray,
    InputError,
    SizeGuardError,
    TransportPlan,
)

# Largest n * m for which the quartic objective is evaluated
GW_SIZE_GUARD = 4096

NORMALIZED_TOL = 1e-9


def _gw_terms(plan: FloatArray, dA: FloatArray, dB: FloatArray) -> Iterator[float]:
    # One source row at a time keeps the 4-D block at n * m * m entries
    for i in range(plan.shape[0]):
        diff = np.abs(dA[i][None, :, None] - dB[:, None, :])  # (j, i', j')
        block = (diff * plan[i][:, None, None]) * plan[None, :, :]
        yield from block.ravel().tolist()


def gw_objective_exact(plan: TransportPlan, dA: DistanceMatrix, dB: DistanceMatrix) -> float:
    """
    Sum over (i, j, i', j') of |DA[i, i'] - DB[j, j']| pi_ij pi_i'j'.

    Each term is formed as (|diff| * pi_ij) * pi_i'j' and the terms are summed
    with exact rounding, so the result does not depend on traversal order.
    """
    n, m = plan.shape
    if dA.size != n or dB.size != m:
        raise InputError(f"Plan shape {(n, m)} does not match distances ({dA.size}, {dB.size})")
    if n * m > GW_SIZE_GUARD:
        raise SizeGuardError(f"GW objective guard: n*m = {n * m} > {GW_SIZE_GUARD}")
    return math.fsum(_gw_terms(plan.data, dA.data, dB.data))


def linearized_geo_cost(dA: DistanceMatrix, dB: DistanceMatrix, anchors: AnchorSet) -> CostMatrix:
    """C_geo[i, j] = mean over anchors (a, b) of |DA[i, a] - DB[j, b]|, summed anchor by anchor."""
    if anchors.k == 0:
        raise InputError("Empty anchor set")
    sources = anchors.sources
    targets = anchors.targets
    if sources.max() >= dA.size or targets.max() >= dB.size:
        raise InputError("Anchor index out of range")
    total = np.zeros((dA.size, dB.size))
    for a, b in zip(sources, targets):
        total += np.abs(dA.data[:, a][:, None] - dB.data[:, b][None, :])
    return CostMatrix(total / anchors.k, kind="geometric")


def fuse_costs(sem: CostMatrix, geo: CostMatrix, cfg: FusionConfig) -> CostMatrix:
    """(1 - alpha) * sem + alpha * geo on two min-max normalized costs."""
    if sem.shape != geo.shape:
        raise InputError(f"Cost shapes differ: {sem.shape} vs {geo.shape}")
    for name, cost in (("semantic", sem), ("geometric", geo)):
        if cost.data.size and cost.data.max() > 1.0 + NORMALIZED_TOL:
            raise InputError(f"{name} cost is not normalized (max {cost.data.max():.6g})")
    alpha = cfg.alpha
    fused = (1.0 - alpha) * sem.data + alpha * geo.data
    return CostMatrix(np.clip(fused, 0.0, 1.0), kind="fused")
