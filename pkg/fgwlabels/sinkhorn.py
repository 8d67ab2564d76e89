"""
Entropic optimal transport solvers.

Balanced Sinkhorn and unbalanced (KL-relaxed) Sinkhorn, both in the log
domain. The entropic term is KL(pi || a x b), so the plan reads

    pi_ij = a_i b_j exp(phi_i + gamma_j - C_ij / eps)

with phi, gamma the log-scalings. Each half-step is an exact block
maximization of the dual; the unbalanced update damps it by
lambda = rho / (rho + eps). A third variant keeps an undamped update order
with u, v in units of rho, for comparison against the textbook form.
"""

import math

import numpy as np
from scipy.special import kl_div, logsumexp

from .config import SolverConfig
from .types import (
    CostMatrix,
    DiscreteMeasure,
    FloatArray,
    InputError,
    SolveDiagnostics,
    TransportPlan,
)
from .utils import debug, warn

MASS_TOL = 1e-9

# Potentials beyond this make exp() overflow when combined; the pseudocode variant stops there
POTENTIAL_LIMIT = 300.0


def _check_shapes(cost: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure) -> None:
    n, m = cost.shape
    if (n, m) != (a.size, b.size):
        raise InputError(f"Cost shape {(n, m)} does not match marginals ({a.size}, {b.size})")
    if n == 0 or m == 0:
        raise InputError("Empty transport problem")


def _log_mass(mass: FloatArray) -> FloatArray:
    with np.errstate(divide="ignore"):
        return np.log(mass)


def _marginal_errors(plan: FloatArray, a: FloatArray, b: FloatArray) -> tuple[float, float]:
    row = float(np.abs(plan.sum(axis=1) - a).sum())
    col = float(np.abs(plan.sum(axis=0) - b).sum())
    return row, col


def _dual_value(
    phi: FloatArray,
    gamma: FloatArray,
    log_kernel: FloatArray,
    a: FloatArray,
    b: FloatArray,
    eps: float,
    rho: float | None,
) -> float:
    """Dual objective at potentials f = eps * phi, g = eps * gamma (rho None means balanced)."""
    f = eps * phi
    g = eps * gamma
    plan = np.exp(log_kernel + phi[:, None] + gamma[None, :])
    coupling = -eps * float((plan - np.outer(a, b)).sum())
    if rho is None:
        return float(f @ a + g @ b) + coupling
    row = -rho * float(a @ (np.exp(-f / rho) - 1.0))
    col = -rho * float(b @ (np.exp(-g / rho) - 1.0))
    return row + col + coupling


def _scaling_loop(
    cost: CostMatrix,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    cfg: SolverConfig,
    variant: str,
) -> tuple[TransportPlan, SolveDiagnostics]:
    eps = cfg.epsilon
    rho = None if variant == "balanced" else cfg.rho
    damping = 1.0 if rho is None else rho / (rho + eps)
    log_a = _log_mass(a.mass)
    log_b = _log_mass(b.mass)
    scaled = -cost.data / eps
    # log of a_i b_j exp(-C_ij / eps)
    log_kernel = log_a[:, None] + log_b[None, :] + scaled

    n, m = cost.shape
    phi = np.zeros(n)
    gamma = np.zeros(m)
    change = math.inf
    converged = False
    trace: list[float] = []
    it = 0
    for it in range(1, cfg.max_iters + 1):
        phi_new = -damping * logsumexp(scaled + (log_b + gamma)[None, :], axis=1)
        gamma_new = -damping * logsumexp(scaled + (log_a + phi_new)[:, None], axis=0)
        change = max(float(np.abs(phi_new - phi).max()), float(np.abs(gamma_new - gamma).max()))
        phi, gamma = phi_new, gamma_new
        if cfg.record_every and it % cfg.record_every == 0:
            trace.append(_dual_value(phi, gamma, log_kernel, a.mass, b.mass, eps, rho))
        if change < cfg.tol:
            converged = True
            break

    data = np.exp(log_kernel + phi[:, None] + gamma[None, :])
    return _finish(data, cost, a, b, cfg, variant, it, change, converged, tuple(trace))


def _undamped_loop(
    cost: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure, cfg: SolverConfig
) -> tuple[TransportPlan, SolveDiagnostics]:
    """
    Literal update order: Z = -C / rho, u = rho (log mu - LSE(Z + v)), v likewise,
    plan = exp(Z + u + v). Row sums equal mu only at rho = 1; the general closed
    form at a fixed point is mu_i exp(u_i (1 - 1 / rho)).
    """
    rho = cfg.rho
    log_mu = _log_mass(a.mass)
    log_nu = _log_mass(b.mass)
    z = -cost.data / rho
    n, m = cost.shape
    u = np.zeros(n)
    v = np.zeros(m)
    change = math.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        u_new = rho * (log_mu - logsumexp(z + v[None, :], axis=1))
        v_new = rho * (log_nu - logsumexp(z + u_new[:, None], axis=0))
        finite = np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))
        if not finite or max(np.abs(u_new).max(), np.abs(v_new).max()) > POTENTIAL_LIMIT:
            warn(f"Pseudocode iteration diverged at step {it} (rho={rho})")
            break
        change = max(float(np.abs(u_new - u).max()), float(np.abs(v_new - v).max()))
        u, v = u_new, v_new
        if change < cfg.tol:
            converged = True
            break

    data = np.exp(z + u[:, None] + v[None, :])
    return _finish(data, cost, a, b, cfg, "uot_paper_pseudocode", it, change, converged, ())


def _finish(
    data: FloatArray,
    cost: CostMatrix,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    cfg: SolverConfig,
    variant: str,
    iterations: int,
    change: float,
    converged: bool,
    trace: tuple[float, ...],
) -> tuple[TransportPlan, SolveDiagnostics]:
    if not converged:
        warn(f"{variant} solver stopped after {iterations} iterations (change {change:.3e})")
    if variant == "balanced":
        objective = float((cost.data * data).sum())
    else:
        objective = uot_objective(data, cost, a, b, cfg.rho)
    row_err, col_err = _marginal_errors(data, a.mass, b.mass)
    debug(
        f"{variant}: {iterations} iterations, change {change:.3e}, "
        f"mass {data.sum():.6f}, objective {objective:.6f}"
    )
    plan = TransportPlan(data, solver=variant, objective=objective)
    diag = SolveDiagnostics(
        iterations_used=iterations,
        final_potential_change=change,
        row_marginal_err=row_err,
        col_marginal_err=col_err,
        transported_mass=float(data.sum()),
        converged=converged,
        variant=variant,
        dual_trace=trace,
    )
    return plan, diag


def solve_balanced(
    cost: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure, cfg: SolverConfig
) -> tuple[TransportPlan, SolveDiagnostics]:
    """Entropic balanced OT; a and b must each sum to 1."""
    _check_shapes(cost, a, b)
    for name, measure in (("a", a), ("b", b)):
        if abs(measure.total - 1.0) > MASS_TOL:
            raise InputError(f"Balanced marginal {name} sums to {measure.total}, expected 1")
    return _scaling_loop(cost, a, b, cfg, "balanced")


def solve_unbalanced(
    cost: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure, cfg: SolverConfig
) -> tuple[TransportPlan, SolveDiagnostics]:
    """KL-relaxed entropic OT, textbook damping or the pseudocode update order."""
    _check_shapes(cost, a, b)
    if cfg.variant == "uot_textbook":
        return _scaling_loop(cost, a, b, cfg, "uot_textbook")
    if cfg.variant == "uot_paper_pseudocode":
        return _undamped_loop(cost, a, b, cfg)
    raise InputError(f"solve_unbalanced needs an unbalanced variant, got {cfg.variant!r}")


def solve(
    cost: CostMatrix, a: DiscreteMeasure, b: DiscreteMeasure, cfg: SolverConfig
) -> tuple[TransportPlan, SolveDiagnostics]:
    """Dispatch on cfg.variant."""
    if cfg.variant == "balanced":
        return solve_balanced(cost, a, b, cfg)
    return solve_unbalanced(cost, a, b, cfg)


def uot_objective(
    plan: TransportPlan | FloatArray,
    cost: CostMatrix,
    a: DiscreteMeasure,
    b: DiscreteMeasure,
    rho: float,
    epsilon: float = 0.0,
) -> float:
    """
    <C, pi> + rho KL(pi 1 || a) + rho KL(pi^T 1 || b), with the generalized
    KL(p || q) = sum p log(p / q) - p + q. Mass sent to a zero-mass point
    makes the value infinite. A positive epsilon adds eps KL(pi || a x b),
    the entropic objective the solver actually minimizes.
    """
    data = plan.data if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    if data.shape != cost.shape or data.shape != (a.size, b.size):
        raise InputError(f"Plan shape {data.shape} does not match cost {cost.shape}")
    if np.any(data < 0) or not np.all(np.isfinite(data)):
        raise InputError("Plan has negative or non-finite entries")
    transport = float((cost.data * data).sum())
    row = float(kl_div(data.sum(axis=1), a.mass).sum())
    col = float(kl_div(data.sum(axis=0), b.mass).sum())
    value = transport + rho * row + rho * col
    if epsilon > 0:
        value += epsilon * float(kl_div(data, np.outer(a.mass, b.mass)).sum())
    return value if math.isfinite(value) else math.inf
