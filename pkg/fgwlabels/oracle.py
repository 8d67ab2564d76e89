"""Brute-force references: permutation LP optimum and exact GW evaluation."""

import itertools
import math
from typing import Any

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import SolverConfig
from .core import minmax_normalize, pairwise_distances, semantic_cost
from .gw import GW_SIZE_GUARD, gw_objective_exact
from .sinkhorn import solve_balanced
from .types import CostMatrix, InputError, PairProblem, SizeGuardError, TransportPlan

# Largest n for which all n! permutations are enumerated
LP_SIZE_GUARD = 7

ORACLE_EPSILON = 0.01


def permutation_lp_optimum(cost: CostMatrix) -> tuple[float, tuple[int, ...]]:
    """
    Exact balanced OT optimum with uniform 1/n marginals on a square cost.

    The optimum is attained at a permutation, so all n! are enumerated; the
    first permutation in lexicographic order wins ties.
    """
    n, m = cost.shape
    if n != m:
        raise InputError(f"Permutation LP needs a square cost, got {cost.shape}")
    if n > LP_SIZE_GUARD:
        raise SizeGuardError(f"Permutation LP guard: n = {n} > {LP_SIZE_GUARD}")
    c = cost.data
    best = math.inf
    best_perm: tuple[int, ...] = ()
    for perm in itertools.permutations(range(n)):
        value = math.fsum(c[i, j] for i, j in enumerate(perm)) / n
        if value < best:
            best, best_perm = value, perm
    return best, best_perm


def assignment_optimum(cost: CostMatrix) -> float:
    """Same optimum through the Hungarian algorithm (any size)."""
    rows, cols = linear_sum_assignment(cost.data)
    return math.fsum(cost.data[rows, cols]) / cost.shape[0]


def identity_plan(n: int, m: int) -> TransportPlan:
    """Mass 1/n on (i, i); the ground-truth plan of an unshuffled pair."""
    if n != m:
        raise InputError(f"Identity plan needs n == m, got {n} x {m}")
    return TransportPlan(np.eye(n) / n, solver="identity")


def oracle_report(
    prob: PairProblem,
    plan: TransportPlan | None = None,
    epsilon: float = ORACLE_EPSILON,
) -> dict[str, Any]:
    """
    Exact GW value of a plan (identity when none is given) and, for square
    instances within the LP guard, the permutation LP optimum of the normalized
    semantic cost next to its Hungarian cross-check and balanced Sinkhorn's
    transport cost.
    """
    n, m = prob.n, prob.m
    if plan is None:
        plan = identity_plan(n, m)
    if plan.shape != (n, m):
        raise InputError(f"Plan shape {plan.shape} does not match bundle ({n}, {m})")
    if n * m > GW_SIZE_GUARD:
        raise SizeGuardError(f"GW objective guard: n*m = {n * m} > {GW_SIZE_GUARD}")

    dA = pairwise_distances(prob.ptsA)
    dB = pairwise_distances(prob.ptsB)
    report: dict[str, Any] = {
        "n": n,
        "m": m,
        "plan_solver": plan.solver,
        "gw_value": gw_objective_exact(plan, dA, dB),
        "lp_optimum": None,
        "assignment_optimum": None,
        "sinkhorn_cost": None,
        "relative_gap": None,
    }
    if n == m and n <= LP_SIZE_GUARD:
        cost = minmax_normalize(semantic_cost(prob.featA, prob.featB))
        optimum, _ = permutation_lp_optimum(cost)
        cfg = SolverConfig(epsilon=epsilon, variant="balanced", max_iters=20000)
        sink, _ = solve_balanced(cost, prob.massA, prob.massB, cfg)
        transport = float((cost.data * sink.data).sum())
        report["lp_optimum"] = optimum
        report["assignment_optimum"] = assignment_optimum(cost)
        report["sinkhorn_cost"] = transport
        report["relative_gap"] = (transport - optimum) / optimum if optimum > 0 else None
    return report
