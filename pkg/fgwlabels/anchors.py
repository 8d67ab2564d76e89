"""Cycle-consistent anchor selection from a transport plan."""

import numpy as np

from .config import AnchorConfig
from .types import AnchorSelectionError, AnchorSet, InputError, PointSet3D, TransportPlan
from .utils import debug


def select_anchors(
    plan: TransportPlan, ptsA: PointSet3D, ptsB: PointSet3D, cfg: AnchorConfig
) -> AnchorSet:
    """
    Pick up to K one-to-one (source, target) pairs whose forward/backward argmax
    round trip lands within delta of where it started.

    delta is the cfg.quantile quantile of the cycle errors plus cfg.floor, so on
    clean plans it keeps the mutual matches. Survivors are ranked by plan value
    (or plan value damped by exp(-e / delta) with ranking="combined"), ties by
    source index, and taken greedily without reusing a target.
    """
    n, m = plan.shape
    if ptsA.size != n or ptsB.size != m:
        raise InputError(f"Plan shape {(n, m)} does not match points ({ptsA.size}, {ptsB.size})")

    data = plan.data
    forward = np.argmax(data, axis=1)  # j*(i), lowest index on ties
    backward = np.argmax(data, axis=0)  # i*(j)
    returned = backward[forward]
    cycle_error = np.linalg.norm(ptsA.points - ptsA.points[returned], axis=1)
    confidence = data[np.arange(n), forward]
    # Rows that send no mass have no match to trace
    active = np.flatnonzero(confidence > 0)
    if active.size == 0:
        raise AnchorSelectionError("No cycle-consistent anchors: the plan carries no mass")
    delta = float(np.quantile(cycle_error[active], cfg.quantile)) + cfg.floor
    survivors = active[cycle_error[active] <= delta]

    score = confidence
    if cfg.ranking == "combined" and delta > 0:
        score = confidence * np.exp(-cycle_error / delta)
    order = survivors[np.lexsort((survivors, -score[survivors]))]

    pairs: list[tuple[int, int]] = []
    used: set[int] = set()
    for i in order:
        j = int(forward[i])
        if j in used:
            continue
        used.add(j)
        pairs.append((int(i), j))
        if len(pairs) == cfg.k:
            break

    picked = np.array([i for i, _ in pairs], dtype=np.int64)
    shortfall = len(pairs) < cfg.k
    debug(
        f"Anchors: {len(pairs)}/{cfg.k} from {survivors.size} survivors, "
        f"delta={delta:.3e}{' (shortfall)' if shortfall else ''}"
    )
    return AnchorSet(
        pairs=tuple(pairs),
        confidence=confidence[picked],
        cycle_error=cycle_error[picked],
        threshold=delta,
        shortfall=shortfall,
    )
