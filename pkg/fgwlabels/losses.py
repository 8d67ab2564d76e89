"""Training-side consumers of pseudo-labels: soft targets, soft cross-entropy, dense loss."""

from collections.abc import Sequence

import numpy as np
from scipy.special import log_softmax, softmax

from .config import SoftTargetConfig, SolverConfig
from .sinkhorn import solve_balanced
from .types import (
    BoolArray,
    CostMatrix,
    DiscreteMeasure,
    FloatArray,
    InputError,
    LossReport,
    PseudoLabels,
    SimilarityMatrix,
    TransportPlan,
)
from .utils import STREAM_DENSE_NOISE, make_rng

# (source index, target position on the grid)
DensePair = tuple[int, tuple[float, float]]


def current_plan(sim: SimilarityMatrix, cfg: SolverConfig) -> TransportPlan:
    """Balanced entropic plan on 1 - S, marked detached (no gradient flows through it)."""
    n, m = sim.shape
    cost = CostMatrix(np.clip(1.0 - sim.data, 0.0, 2.0), kind="semantic")
    plan, _ = solve_balanced(cost, DiscreteMeasure.uniform(n), DiscreteMeasure.uniform(m), cfg)
    return TransportPlan(plan.data, solver=plan.solver, objective=plan.objective, detached=True)


def soft_target(
    hard: PseudoLabels | BoolArray | FloatArray, curr: TransportPlan, cfg: SoftTargetConfig
) -> FloatArray:
    """(1 - beta) * hard + beta * current plan."""
    hard_f = np.asarray(hard.hard if isinstance(hard, PseudoLabels) else hard, dtype=np.float64)
    if hard_f.shape != curr.shape:
        raise InputError(f"Hard target shape {hard_f.shape} does not match plan {curr.shape}")
    beta = cfg.beta
    return (1.0 - beta) * hard_f + beta * curr.data


def _directional_ce(
    scores: FloatArray, sim: FloatArray, target: FloatArray, tau: float
) -> tuple[float, FloatArray, float]:
    """Row-wise soft CE averaged over rows that carry target mass."""
    z = target.sum(axis=1)
    rows = z > 0
    count = int(rows.sum())
    grad = np.zeros_like(scores)
    if count == 0:
        return 0.0, grad, 0.0
    logp = log_softmax(scores[rows], axis=1)
    p = np.exp(logp)
    q = target[rows] / z[rows][:, None]
    value = float(-(q * logp).sum()) / count
    grad[rows] = tau * (p - q) / count
    grad_tau = float(((p - q) * sim[rows]).sum()) / count
    return value, grad, grad_tau


def soft_ce_loss(sim: SimilarityMatrix, target: FloatArray, symmetric: bool = True) -> LossReport:
    """
    Cross-entropy between softmax(tau * S) and the target normalized per row
    (and per column when symmetric, the two directions averaged). Rows or
    columns with no target mass are skipped.
    """
    t = np.asarray(target, dtype=np.float64)
    if t.shape != sim.shape:
        raise InputError(f"Target shape {t.shape} does not match similarity {sim.shape}")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InputError("Target has negative or non-finite entries")

    s = sim.data
    tau = sim.tau
    value, grad, grad_tau = _directional_ce(tau * s, s, t, tau)
    if symmetric:
        col_value, col_grad, col_tau = _directional_ce(tau * s.T, s.T, t.T, tau)
        value = 0.5 * (value + col_value)
        grad = 0.5 * (grad + col_grad.T)
        grad_tau = 0.5 * (grad_tau + col_tau)
    return LossReport(value=value, grad_S=grad, grad_tau=grad_tau)


def dense_loss(
    sim: SimilarityMatrix,
    pairs: Sequence[DensePair],
    grid: FloatArray,
    noise_sigma: float = 0.0,
    seed: int = 0,
    tau: float | None = None,
) -> LossReport:
    """
    Sum over pairs of || sum_j softmax(tau * S_i)_j g_j - (p + noise) ||.

    Noise is drawn from its own seeded stream. Where the residual vanishes
    the zero subgradient is used.
    """
    g = np.asarray(grid, dtype=np.float64)
    n, m = sim.shape
    if g.shape != (m, 2):
        raise InputError(f"Grid must be {m} x 2, got {g.shape}")
    if noise_sigma < 0:
        raise InputError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    temp = sim.tau if tau is None else tau
    if not temp > 0:
        raise InputError(f"Temperature must be positive, got {temp}")
    lo, hi = g.min(axis=0), g.max(axis=0)

    noise = make_rng(seed, STREAM_DENSE_NOISE).normal(0.0, noise_sigma, size=(len(pairs), 2))
    value = 0.0
    grad = np.zeros((n, m))
    grad_tau = 0.0
    for (i, position), eps in zip(pairs, noise):
        p = np.asarray(position, dtype=np.float64)
        if not 0 <= i < n or p.shape != (2,):
            raise InputError(f"Bad dense pair ({i}, {position})")
        if np.any(p < lo) or np.any(p > hi):
            raise InputError(f"Target position {position} outside the grid bounds")
        w = softmax(temp * sim.data[i])
        pred = w @ g
        residual = pred - (p + eps)
        dist = float(np.linalg.norm(residual))
        value += dist
        if dist == 0.0:
            continue
        # d pred / d s_j = tau * w_j * (g_j - pred)
        direction = residual / dist
        along = (g - pred) @ direction
        grad[i] += temp * w * along
        grad_tau += float((w * along) @ sim.data[i])
    return LossReport(value=value, grad_S=grad, grad_tau=grad_tau)
