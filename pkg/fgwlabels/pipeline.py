"""
Iterative FGW pseudo-label pipeline.

Stage 0 solves unbalanced OT on the semantic cost. Each later stage selects
cycle-consistent anchors from the previous plan, builds the anchor-linearized
geometric cost, fuses it with the semantic cost and solves again from a cold
start. The final plan is turned into multi-hot pseudo-labels with a relaxed
mutual top-k filter.
"""

from dataclasses import dataclass, replace

import numpy as np

from .anchors import select_anchors
from .config import PipelineConfig, SolverConfig, SolverVariant
from .core import cosine_similarity, minmax_normalize, pairwise_distances, semantic_cost
from .gw import fuse_costs, linearized_geo_cost
from .sinkhorn import solve, solve_balanced
from .types import (
    AnchorSelectionError,
    AnchorSet,
    FeatureMatrix,
    InputError,
    Match,
    PairProblem,
    PseudoLabels,
    SolveDiagnostics,
    StageDiagnostics,
    TransportPlan,
)
from .utils import debug, log, warn

METHODS = ("nn", "semantic_ot", "fused_ot", "fused_uot")


@dataclass(frozen=True)
class PipelineResult:
    plan: TransportPlan  # final stage
    anchor_sets: tuple[AnchorSet | None, ...]  # one per stage >= 1, None on fallback
    diagnostics: tuple[StageDiagnostics, ...]  # stage 0 .. T
    stage_plans: tuple[TransportPlan, ...]  # stage 0 .. T


def _stage_record(
    stage: int,
    plan: TransportPlan,
    diag: SolveDiagnostics,
    anchors: AnchorSet | None = None,
    fallback: bool = False,
) -> StageDiagnostics:
    return StageDiagnostics(
        stage=stage,
        objective=plan.objective,
        row_marginal_err=diag.row_marginal_err,
        col_marginal_err=diag.col_marginal_err,
        transported_mass=diag.transported_mass,
        iterations_used=diag.iterations_used,
        converged=diag.converged,
        anchor_count=anchors.k if anchors is not None else 0,
        anchor_mean_cycle_error=anchors.mean_cycle_error if anchors is not None else 0.0,
        anchor_shortfall=anchors.shortfall if anchors is not None else False,
        fallback=fallback,
    )


def run_pipeline(prob: PairProblem, cfg: PipelineConfig) -> PipelineResult:
    a, b = prob.massA, prob.massB
    sem = semantic_cost(prob.featA, prob.featB)
    sem_norm = minmax_normalize(sem)
    dA = pairwise_distances(prob.ptsA)
    dB = pairwise_distances(prob.ptsB)

    plan, diag = solve(sem_norm if cfg.normalize_initial_cost else sem, a, b, cfg.solver)
    plan = replace(plan, iteration=0)
    plans = [plan]
    records = [_stage_record(0, plan, diag)]
    anchor_sets: list[AnchorSet | None] = []

    for t in range(1, cfg.iters_T + 1):
        try:
            anchors: AnchorSet | None = select_anchors(plan, prob.ptsA, prob.ptsB, cfg.anchor)
        except AnchorSelectionError as e:
            warn(f"Stage {t}: {e}; falling back to the semantic cost")
            anchors = None
        if anchors is None:
            cost = sem_norm
        else:
            geo = minmax_normalize(linearized_geo_cost(dA, dB, anchors))
            cost = fuse_costs(sem_norm, geo, cfg.fusion)
        plan, diag = solve(cost, a, b, cfg.solver)
        plan = replace(plan, iteration=t)
        plans.append(plan)
        anchor_sets.append(anchors)
        records.append(_stage_record(t, plan, diag, anchors, fallback=anchors is None))
        debug(f"Stage {t}: objective {plan.objective:.6f}, mass {diag.transported_mass:.6f}")

    log(f"Pipeline finished: {cfg.iters_T} stages, final mass {records[-1].transported_mass:.4f}")
    return PipelineResult(
        plan=plan,
        anchor_sets=tuple(anchor_sets),
        diagnostics=tuple(records),
        stage_plans=tuple(plans),
    )


def extract_pseudo_labels(plan: TransportPlan, cfg: PipelineConfig) -> PseudoLabels:
    """
    Row top-k of the plan, kept only where the target's column top-k also
    contains the source (relaxed cycle consistency). With relaxed_cc off every
    forward top-k candidate is kept. Ties go to the lower index.
    """
    data = plan.data
    n, m = plan.shape
    k_row = min(cfg.topk, m)
    k_col = min(cfg.topk, n)
    row_top = np.argsort(-data, axis=1, kind="stable")[:, :k_row]
    col_top = np.argsort(-data, axis=0, kind="stable")[:k_col, :]
    in_col_top = np.zeros((n, m), dtype=np.bool_)
    in_col_top[col_top, np.arange(m)[None, :]] = True

    hard = np.zeros((n, m), dtype=np.bool_)
    candidates: list[tuple[tuple[int, float], ...]] = []
    proposed: list[tuple[tuple[int, float], ...]] = []
    for i in range(n):
        row = tuple((int(j), float(data[i, j])) for j in row_top[i])
        kept = tuple((j, v) for j, v in row if not cfg.relaxed_cc or in_col_top[i, j])
        for j, _ in kept:
            hard[i, j] = True
        proposed.append(row)
        candidates.append(kept)

    kept_mask = np.array([bool(c) for c in candidates], dtype=np.bool_)
    debug(f"Pseudo-labels: {int(kept_mask.sum())}/{n} sources kept (k={cfg.topk})")
    return PseudoLabels(
        hard=hard,
        candidates=tuple(candidates),
        proposed=tuple(proposed),
        kept_mask=kept_mask,
        k=cfg.topk,
    )


def infer_matches(featA: FeatureMatrix, featB: FeatureMatrix) -> list[Match]:
    """Nearest neighbour by cosine similarity for every source."""
    sim = cosine_similarity(featA, featB)
    best = np.argmax(sim, axis=1)
    return [(i, int(j), float(sim[i, j])) for i, j in enumerate(best)]


def plan_matches(plan: TransportPlan) -> list[Match]:
    """Row argmax of a plan; rows carrying no mass emit nothing."""
    data = plan.data
    best = np.argmax(data, axis=1)
    return [(i, int(j), float(data[i, j])) for i, j in enumerate(best) if data[i, j] > 0]


def semantic_ot_plan(prob: PairProblem, solver: SolverConfig) -> TransportPlan:
    """Balanced entropic OT on the normalized semantic cost."""
    cost = minmax_normalize(semantic_cost(prob.featA, prob.featB))
    plan, _ = solve_balanced(cost, prob.massA, prob.massB, solver)
    return plan


def with_variant(cfg: PipelineConfig, variant: SolverVariant) -> PipelineConfig:
    solver = cfg.solver.model_copy(update={"variant": variant})
    return cfg.model_copy(update={"solver": solver})


def compare_methods(
    prob: PairProblem, cfg: PipelineConfig, methods: tuple[str, ...] = METHODS
) -> dict[str, list[Match]]:
    """Matches from each baseline on one problem, keyed by method name."""
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InputError(f"Unknown methods: {sorted(unknown)}")
    balanced = with_variant(cfg, "balanced")
    unbalanced = cfg if cfg.solver.variant != "balanced" else with_variant(cfg, "uot_textbook")

    out: dict[str, list[Match]] = {}
    for method in methods:
        if method == "nn":
            out[method] = infer_matches(prob.featA, prob.featB)
        elif method == "semantic_ot":
            out[method] = plan_matches(semantic_ot_plan(prob, cfg.solver))
        elif method == "fused_ot":
            out[method] = plan_matches(run_pipeline(prob, balanced).plan)
        else:
            out[method] = plan_matches(run_pipeline(prob, unbalanced).plan)
    return out
