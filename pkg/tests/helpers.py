"""Builders and scalar-loop reference implementations used by the tests."""

import math
from collections.abc import Callable

import numpy as np

from fgwlabels.types import CostMatrix, DiscreteMeasure, PointSet3D
from fgwlabels.utils import make_rng


def random_cost(seed: int, n: int, m: int) -> CostMatrix:
    return CostMatrix(make_rng(seed).uniform(0.0, 1.0, size=(n, m)), kind="fused")


def uniform(n: int) -> DiscreteMeasure:
    return DiscreteMeasure.uniform(n)


def random_points(seed: int, n: int) -> PointSet3D:
    return PointSet3D(make_rng(seed).normal(size=(n, 3)))


def random_rotation(seed: int) -> np.ndarray:
    q, r = np.linalg.qr(make_rng(seed, 7).normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def naive_distances(points: list[list[float]]) -> list[list[float]]:
    n = len(points)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for k in range(n):
            if i != k:
                diffs = [points[i][c] - points[k][c] for c in range(3)]
                out[i][k] = math.sqrt(sum(d * d for d in diffs))
    return out


def naive_gw(plan: np.ndarray, dA: np.ndarray, dB: np.ndarray) -> float:
    n, m = plan.shape
    terms = []
    for i in range(n):
        for j in range(m):
            for k in range(n):
                for q in range(m):
                    terms.append(abs(dA[i, k] - dB[j, q]) * plan[i, j] * plan[k, q])
    return math.fsum(terms)


def generalized_kl(p: list[float], q: list[float]) -> float:
    total = 0.0
    for x, y in zip(p, q):
        if x == 0:
            total += y
        elif y == 0:
            return math.inf
        else:
            total += x * math.log(x / y) - x + y
    return total


def naive_uot_objective(
    plan: np.ndarray, cost: np.ndarray, a: np.ndarray, b: np.ndarray, rho: float
) -> float:
    n, m = plan.shape
    transport = 0.0
    for i in range(n):
        for j in range(m):
            transport += cost[i, j] * plan[i, j]
    rows = [sum(plan[i, j] for j in range(m)) for i in range(n)]
    cols = [sum(plan[i, j] for i in range(n)) for j in range(m)]
    return transport + rho * generalized_kl(rows, list(a)) + rho * generalized_kl(cols, list(b))


def naive_argmax_matches(featA: np.ndarray, featB: np.ndarray) -> list[int]:
    best = []
    for a in featA:
        scores = [float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)) for b in featB]
        top = 0
        for j, s in enumerate(scores):
            if s > scores[top]:
                top = j
        best.append(top)
    return best


def naive_metrics(
    matches: list[tuple[int, int, float]],
    assignment: dict[int, int],
    radius: float,
    pts: np.ndarray,
) -> tuple[float | None, float, float]:
    correct = 0
    hit = set()
    first: dict[int, int] = {}
    for i, j, _ in matches:
        if i not in first:
            first[i] = j
        if i in assignment:
            d = math.sqrt(sum((pts[j][c] - pts[assignment[i]][c]) ** 2 for c in range(3)))
            if d <= radius:
                correct += 1
                hit.add(i)
    precision = correct / len(matches) if matches else None
    recall = len(hit) / len(assignment)
    accuracy = sum(1 for i, j in assignment.items() if first.get(i) == j) / len(assignment)
    return precision, recall, accuracy


def central_difference(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        up = x.copy()
        down = x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (f(up) - f(down)) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale
