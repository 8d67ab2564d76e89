"""
Synthetic pair generator with known ground truth, evaluation and suite runners.

Source points sit on a mirrored half-grid (point 2k and 2k + 1 are left/right
twins) embedded in 3D with a bend that keeps the mirror an isometry. Features
are a seeded random Fourier field of the intrinsic grid coordinate. The target
cloud is a rigid motion of the source with its rows shuffled by a seeded
permutation; scenario kinds then alias twins, cut the overlap, jitter points or
displace a component.
"""

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation

from .config import DEFAULT_RADIUS, PipelineConfig, Scenario
from .pipeline import extract_pseudo_labels, plan_matches, run_pipeline
from .types import (
    FeatureMatrix,
    FloatArray,
    GroundTruth,
    InputError,
    Match,
    Metrics,
    PairProblem,
    PointSet3D,
    PseudoLabels,
    TransportPlan,
)
from .utils import STREAM_FEATURES, STREAM_GEOMETRY, STREAM_PERMUTATION, debug, log, make_rng

# Hyperparameters a sweep can vary, mapped to (section, field) of PipelineConfig
SWEEP_PARAMS: dict[str, tuple[str | None, str]] = {
    "k": ("anchor", "k"),
    "quantile": ("anchor", "quantile"),
    "alpha": ("fusion", "alpha"),
    "rho": ("solver", "rho"),
    "epsilon": ("solver", "epsilon"),
    "iters": (None, "iters_T"),
    "topk": (None, "topk"),
}

INTEGER_PARAMS = {"k", "iters", "topk"}


def grid_layout(n: int) -> tuple[FloatArray, float]:
    """Intrinsic (u, v) coordinates of n points and the grid spacing; rows 2k, 2k+1 are twins."""
    half = (n + 1) // 2
    cols = max(1, math.ceil(math.sqrt(half / 2)))
    rows = math.ceil(half / cols)
    h = 1.0 / max(2 * cols, rows)
    coords: list[tuple[float, float]] = []
    for k in range(half):
        r, c = divmod(k, cols)
        u = (c + 0.5) * h
        v = (r - (rows - 1) / 2) * h
        coords.append((u, v))
        coords.append((-u, v))
    return np.array(coords[:n], dtype=np.float64), h


def embed(uv: FloatArray, bend: float) -> FloatArray:
    """Bent sheet in 3D; even in u so the left/right mirror stays an isometry."""
    u, v = uv[:, 0], uv[:, 1]
    z = bend * (u**2 + 0.5 * v**3)
    return np.column_stack([u, v, z])


def _feature_field(
    dim: int, freq: float, rng: np.random.Generator
) -> tuple[FloatArray, FloatArray]:
    weights = rng.normal(0.0, freq, size=(dim, 2))
    phase = rng.uniform(0.0, 2 * math.pi, size=dim)
    return weights, phase


def _features(uv: FloatArray, field: tuple[FloatArray, FloatArray]) -> FloatArray:
    weights, phase = field
    return np.cos(uv @ weights.T + phase)


def generate(scn: Scenario) -> tuple[PairProblem, GroundTruth]:
    n = scn.n_points
    rng_geo = make_rng(scn.seed, STREAM_GEOMETRY)
    rng_feat = make_rng(scn.seed, STREAM_FEATURES)
    rng_perm = make_rng(scn.seed, STREAM_PERMUTATION)

    uv_a, h = grid_layout(n)
    field = _feature_field(scn.feature_dim, scn.feature_freq, rng_feat)
    feat_uv_a = uv_a.copy()
    if scn.kind == "mirror_alias":
        pairs = n // 2
        count = round(scn.alias_fraction * pairs)
        aliased = np.sort(rng_feat.choice(pairs, size=count, replace=False))
        rows = np.concatenate([2 * aliased, 2 * aliased + 1])
        feat_uv_a[rows, 0] = np.abs(feat_uv_a[rows, 0])

    # Rows of the target before shuffling, and the source each one came from (-1 for none)
    dropped = np.empty(0, dtype=np.int64)
    if scn.kind == "partial_overlap":
        keep = min(n, max(1, round(scn.overlap_fraction * n)))
        order = np.lexsort((np.arange(n), uv_a[:, 1], uv_a[:, 0]))
        overlap = np.sort(order[:keep])
        dropped = np.sort(order[keep:])
        width = float(uv_a[:, 0].max() - uv_a[:, 0].min()) + h
        extension = uv_a[dropped] - np.array([width, 0.0])
        uv_b = np.concatenate([uv_a[overlap], extension])
        feat_uv_b = np.concatenate([feat_uv_a[overlap], extension])
        origin = np.concatenate([overlap, np.full(dropped.size, -1)])
    else:
        uv_b = uv_a
        feat_uv_b = feat_uv_a
        origin = np.arange(n)
    m = uv_b.shape[0]

    feat_a = _features(feat_uv_a, field)
    feat_a = feat_a + rng_feat.normal(0.0, scn.feature_noise, size=feat_a.shape)
    feat_b = _features(feat_uv_b, field)
    feat_b = feat_b + rng_feat.normal(0.0, scn.feature_noise, size=feat_b.shape)

    pts_a = embed(uv_a, scn.bend)
    pts_b = embed(uv_b, scn.bend)
    if scn.kind == "broken_structure":
        part = uv_b[:, 1] >= np.quantile(uv_b[:, 1], 0.75)
        centre = pts_b[part].mean(axis=0)
        twist = Rotation.from_rotvec(rng_geo.normal(0.0, 0.3, size=3))
        lift = np.array([0.0, 0.0, rng_geo.uniform(0.2, 0.4)])
        pts_b[part] = twist.apply(pts_b[part] - centre) + centre + lift
    if scn.noise_sigma > 0:
        pts_b = pts_b + rng_geo.normal(0.0, scn.noise_sigma, size=pts_b.shape)
    rotation = Rotation.random(random_state=rng_geo)
    shift = rng_geo.uniform(-1.0, 1.0, size=3)
    pts_b = rotation.apply(pts_b) + shift

    # Target row perm[k] holds pre-shuffle row k
    perm = rng_perm.permutation(m)
    shuffled_pts = np.empty_like(pts_b)
    shuffled_feat = np.empty_like(feat_b)
    shuffled_pts[perm] = pts_b
    shuffled_feat[perm] = feat_b

    assignment = {int(origin[k]): int(perm[k]) for k in range(m) if origin[k] >= 0}
    gt = GroundTruth(
        assignment=assignment,
        unmatched_sources=frozenset(int(i) for i in dropped),
        unmatched_targets=frozenset(int(perm[k]) for k in range(m) if origin[k] < 0),
    )
    prob = PairProblem.uniform(
        FeatureMatrix(feat_a),
        FeatureMatrix(shuffled_feat),
        PointSet3D(pts_a),
        PointSet3D(shuffled_pts),
    )
    debug(f"Generated {scn.kind} pair n={n} m={m} seed={scn.seed} ({len(assignment)} matched)")
    return prob, gt


def ground_truth_plan(gt: GroundTruth, n: int, m: int) -> TransportPlan:
    """Plan putting mass 1/n on every ground-truth pair."""
    data = np.zeros((n, m))
    for i, j in gt.assignment.items():
        data[i, j] = 1.0 / n
    return TransportPlan(data, solver="ground_truth")


def evaluate(
    labels: PseudoLabels | Sequence[Match],
    gt: GroundTruth,
    radius: float,
    ptsB: PointSet3D,
) -> Metrics:
    """
    Precision: emitted matches whose target lies within radius of the true
    target (matches from sources without a counterpart are wrong). Recall:
    assigned sources with at least one such match. Accuracy: assigned sources
    whose first emitted match is exactly the true target.
    """
    if not radius > 0:
        raise InputError(f"Radius must be positive, got {radius}")
    matches = labels.matches() if isinstance(labels, PseudoLabels) else list(labels)
    pts = ptsB.points
    for i, j, _ in matches:
        if not 0 <= j < ptsB.size:
            raise InputError(f"Match target {j} out of range for {ptsB.size} points")

    top: dict[int, int] = {}
    hit: set[int] = set()
    correct = 0
    for i, j, _ in matches:
        top.setdefault(i, j)
        truth = gt.assignment.get(i)
        if truth is not None and np.linalg.norm(pts[j] - pts[truth]) <= radius:
            correct += 1
            hit.add(i)

    assigned = len(gt.assignment)
    emitted = len(matches)
    exact = sum(1 for i, j in gt.assignment.items() if top.get(i) == j)
    return Metrics(
        precision=correct / emitted if emitted else None,
        recall=len(hit) / assigned if assigned else 0.0,
        accuracy=exact / assigned if assigned else 0.0,
        emitted=emitted,
        assigned=assigned,
    )


def _target_mass(plan: TransportPlan, gt: GroundTruth) -> tuple[float, float]:
    """Mean column mass on matched and on unmatched targets."""
    cols = plan.data.sum(axis=0)
    matched = sorted(gt.assignment.values())
    unmatched = sorted(gt.unmatched_targets)
    on_matched = float(cols[matched].mean()) if matched else 0.0
    on_unmatched = float(cols[unmatched].mean()) if unmatched else 0.0
    return on_matched, on_unmatched


def run_suite(
    template: Scenario,
    seeds: Sequence[int],
    cfg: PipelineConfig,
    radius: float = DEFAULT_RADIUS,
) -> list[dict[str, Any]]:
    """One record per seed comparing the semantic-only stage with the final stage."""
    records = []
    for seed in seeds:
        scn = template.model_copy(update={"seed": seed})
        prob, gt = generate(scn)
        result = run_pipeline(prob, cfg)
        stage_acc = [evaluate(plan_matches(p), gt, radius, prob.ptsB) for p in result.stage_plans]
        stage_labels = [
            evaluate(extract_pseudo_labels(p, cfg), gt, radius, prob.ptsB)
            for p in result.stage_plans
        ]
        labels = stage_labels[-1]
        on_matched, on_unmatched = _target_mass(result.plan, gt)
        records.append(
            {
                "kind": scn.kind,
                "seed": seed,
                "semantic_accuracy": stage_acc[0].accuracy,
                "pipeline_accuracy": stage_acc[-1].accuracy,
                "improved": stage_acc[-1].accuracy > stage_acc[0].accuracy,
                "stage_accuracy": [s.accuracy for s in stage_acc],
                "stage_precision": [s.precision for s in stage_acc],
                "stage_label_precision": [s.precision for s in stage_labels],
                "label_precision": labels.precision,
                "label_recall": labels.recall,
                "matched_target_mass": on_matched,
                "unmatched_target_mass": on_unmatched,
                "fallback_stages": sum(1 for d in result.diagnostics if d.fallback),
            }
        )
    return records


def override(cfg: PipelineConfig, param: str, value: float) -> PipelineConfig:
    """Copy of cfg with one swept hyperparameter replaced (validated)."""
    if param not in SWEEP_PARAMS:
        raise InputError(f"Unknown sweep parameter {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    section, name = SWEEP_PARAMS[param]
    typed: float | int = int(value) if param in INTEGER_PARAMS else float(value)
    if param in INTEGER_PARAMS and typed != value:
        raise InputError(f"{param} takes integer values, got {value}")
    data = cfg.model_dump()
    if section is None:
        data[name] = typed
    else:
        data[section][name] = typed
    return PipelineConfig.model_validate(data)


def sweep(
    param: str,
    values: Sequence[float],
    template: Scenario,
    seeds: Sequence[int],
    cfg: PipelineConfig,
    radius: float = DEFAULT_RADIUS,
) -> list[dict[str, Any]]:
    """Mean semantic / pipeline accuracy over the seeds for each value of one hyperparameter."""
    out = []
    for value in values:
        records = run_suite(template, seeds, override(cfg, param, value), radius)
        out.append(
            {
                "param": param,
                "value": value,
                "seeds": len(records),
                "semantic_accuracy": float(np.mean([r["semantic_accuracy"] for r in records])),
                "pipeline_accuracy": float(np.mean([r["pipeline_accuracy"] for r in records])),
            }
        )
        log(f"Sweep {param}={value}: pipeline accuracy {out[-1]['pipeline_accuracy']:.3f}")
    return out
