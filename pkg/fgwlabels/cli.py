#!/usr/bin/env python3
"""
Command-line front end.

Usage:
    fgw-labels synth --scenario mirror_alias --n 64 --seed 3 --out pair.fgwb
    fgw-labels match --bundle pair.fgwb --out-dir out/
    fgw-labels match --batch bundles/ --out-dir out/
    fgw-labels eval --bundle pair.fgwb --labels out/pair.labels.json --compare
    fgw-labels oracle --bundle pair.fgwb
    fgw-labels suite --scenario mirror_alias --seeds 25 --out mirror.jsonl
    fgw-labels sweep --param alpha --values 0 0.3 0.6 --scenario mirror_alias
    fgw-labels schema --out schemas/
    fgw-labels validate out/

Structured records go to standard output (one JSON record per line); progress
and warnings go to standard error. Exit codes: 0 success, 1 I/O failure
(missing or malformed input file), 2 usage or validation error, 130 interrupted.
"""

import argparse
import sys
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from .config import (
    DEFAULT_ALPHA,
    DEFAULT_ANCHORS,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
    DEFAULT_QUANTILE,
    DEFAULT_RADIUS,
    DEFAULT_RHO,
    DEFAULT_STAGES,
    DEFAULT_TOL,
    DEFAULT_TOPK,
    SCENARIO_KINDS,
    AnchorConfig,
    FusionConfig,
    PipelineConfig,
    Scenario,
    SolverConfig,
)
from .formats import (
    Bundle,
    read_bundle,
    read_labels,
    read_plan,
    write_bundle,
    write_diagnostics,
    write_labels,
    write_plan,
)
from .oracle import ORACLE_EPSILON, oracle_report
from .pipeline import compare_methods, extract_pseudo_labels, plan_matches, run_pipeline
from .schemas import MetricsRecord, get_all_schemas
from .synth import SWEEP_PARAMS, evaluate, generate, run_suite, sweep
from .types import FGWError, FormatError, GroundTruth, Metrics
from .utils import (
    dumps_record,
    ensure_dir,
    log,
    setup_logging,
    warn,
    worker_count,
    write_json,
    write_jsonl,
)
from .validate import BUNDLE_SUFFIX, DIAGNOSTICS_SUFFIX, LABELS_SUFFIX, PLAN_SUFFIX, validate_paths

SOLVER_FLAGS = {
    "textbook": "uot_textbook",
    "paper-pseudocode": "uot_paper_pseudocode",
    "balanced": "balanced",
}


def emit(record: dict[str, Any]) -> None:
    """Write one structured record to standard output."""
    sys.stdout.write(dumps_record(record) + "\n")
    sys.stdout.flush()


def metrics_record(method: str, metrics: Metrics, stage: int | None = None) -> dict[str, Any]:
    return MetricsRecord(method=method, stage=stage, **metrics.to_dict()).model_dump()


def pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Build the pipeline configuration from the shared pipeline flags."""
    return PipelineConfig(
        iters_T=args.iters,
        fusion=FusionConfig(alpha=args.alpha),
        anchor=AnchorConfig(k=args.anchors, quantile=args.quantile, ranking=args.ranking),
        solver=SolverConfig(
            rho=args.rho,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            tol=args.tol,
            variant=SOLVER_FLAGS[args.solver],
        ),
        topk=args.topk,
        relaxed_cc=not args.no_relaxed_cc,
        normalize_initial_cost=not args.raw_initial_cost,
    )


def require_ground_truth(bundle: Bundle, path: Path) -> GroundTruth:
    if bundle.ground_truth is None:
        raise FGWError(f"{path} carries no ground truth")
    return bundle.ground_truth


def cmd_synth(args: argparse.Namespace) -> int:
    scn = Scenario(
        kind=args.scenario,
        n_points=args.n,
        seed=args.seed,
        feature_dim=args.dim,
        noise_sigma=args.noise,
        overlap_fraction=args.overlap,
        alias_fraction=args.alias,
        feature_noise=args.feature_noise,
        feature_freq=args.freq,
        bend=args.bend,
    )
    prob, gt = generate(scn)
    write_bundle(args.out, Bundle(prob, scn, gt))
    log(f"Wrote {args.out}")
    emit(
        {
            "file": str(args.out),
            "kind": scn.kind,
            "seed": scn.seed,
            "n": prob.n,
            "m": prob.m,
            "d": prob.d,
            "matched": len(gt.assignment),
        }
    )
    return 0


def match_bundle(bundle_path: Path, out_dir: Path, cfg: PipelineConfig) -> dict[str, Any]:
    """Run the pipeline on one bundle and write plan, labels and diagnostics next to each other."""
    bundle = read_bundle(bundle_path)
    result = run_pipeline(bundle.problem, cfg)
    labels = extract_pseudo_labels(result.plan, cfg)
    stem = bundle_path.name.removesuffix(BUNDLE_SUFFIX)
    ensure_dir(out_dir)
    write_plan(out_dir / f"{stem}{PLAN_SUFFIX}", result.plan)
    write_labels(out_dir / f"{stem}{LABELS_SUFFIX}", labels, cfg.relaxed_cc)
    write_diagnostics(out_dir / f"{stem}{DIAGNOSTICS_SUFFIX}", list(result.diagnostics))

    final = result.diagnostics[-1]
    converged = all(d.converged for d in result.diagnostics)
    if not converged:
        warn(f"{bundle_path.name}: solver did not converge in every stage")
    return {
        "bundle": bundle_path.name,
        "solver": cfg.solver.variant,
        "stages": len(result.diagnostics),
        "transported_mass": final.transported_mass,
        "row_marginal_err": final.row_marginal_err,
        "col_marginal_err": final.col_marginal_err,
        "converged": converged,
        "fallback_stages": sum(1 for d in result.diagnostics if d.fallback),
        "labelled_sources": int(labels.kept_mask.sum()),
    }


def _match_worker(bundle_path: str, out_dir: str, cfg: PipelineConfig) -> dict[str, Any]:
    return match_bundle(Path(bundle_path), Path(out_dir), cfg)


def cmd_match(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    if args.bundle is not None:
        emit(match_bundle(args.bundle, args.out_dir, cfg))
        return 0

    bundles = sorted(p for p in args.batch.iterdir() if p.name.endswith(BUNDLE_SUFFIX))
    if not bundles:
        warn(f"No *{BUNDLE_SUFFIX} files in {args.batch}")
        return 0
    workers = min(worker_count(), len(bundles))
    log(f"Matching {len(bundles)} bundle(s) with {workers} worker(s)...")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_match_worker, str(p), str(args.out_dir), cfg) for p in bundles]
        for future in futures:
            emit(future.result())
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if args.labels is None and args.plan is None and not args.compare:
        raise FGWError("eval needs --labels, --plan or --compare")
    bundle = read_bundle(args.bundle)
    gt = require_ground_truth(bundle, args.bundle)
    prob = bundle.problem

    if args.labels is not None:
        labels, _ = read_labels(args.labels)
        emit(metrics_record("labels", evaluate(labels, gt, args.radius, prob.ptsB)))
    if args.plan is not None:
        plan = read_plan(args.plan)
        emit(metrics_record("plan", evaluate(plan_matches(plan), gt, args.radius, prob.ptsB)))
    if args.compare:
        cfg = pipeline_config(args)
        baselines = compare_methods(prob, cfg, methods=("nn", "semantic_ot", "fused_ot"))
        for method, matches in baselines.items():
            emit(metrics_record(method, evaluate(matches, gt, args.radius, prob.ptsB)))
        result = run_pipeline(prob, cfg)
        final = evaluate(plan_matches(result.plan), gt, args.radius, prob.ptsB)
        emit(metrics_record("fused_uot", final))
        for plan in result.stage_plans:
            stage = evaluate(plan_matches(plan), gt, args.radius, prob.ptsB)
            emit(metrics_record("fused_uot", stage, stage=plan.iteration))
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    bundle = read_bundle(args.bundle)
    plan = read_plan(args.plan) if args.plan is not None else None
    emit(oracle_report(bundle.problem, plan, epsilon=args.epsilon))
    return 0


def suite_template(args: argparse.Namespace) -> tuple[Scenario, range]:
    template = Scenario(
        kind=args.scenario,
        n_points=args.n,
        noise_sigma=args.noise,
        overlap_fraction=args.overlap,
        alias_fraction=args.alias,
        feature_noise=args.feature_noise,
    )
    return template, range(args.seed_start, args.seed_start + args.seeds)


def cmd_suite(args: argparse.Namespace) -> int:
    template, seeds = suite_template(args)
    records = run_suite(template, seeds, pipeline_config(args), args.radius)
    for record in records:
        emit(record)
    if args.out is not None:
        write_jsonl(args.out, records)
        log(f"Wrote {len(records)} record(s) to {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    template, seeds = suite_template(args)
    cfg = pipeline_config(args)
    for record in sweep(args.param, args.values, template, seeds, cfg, args.radius):
        emit(record)
    return 0


def cmd_schema(args: argparse.Namespace) -> int:
    ensure_dir(args.out)
    for name, schema in get_all_schemas().items():
        write_json(args.out / name, schema)
        log(f"Wrote {args.out / name}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    ok, _ = validate_paths(args.paths)
    return 0 if ok else 2


def add_pipeline_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline")
    group.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Geometric weight")
    group.add_argument("--rho", type=float, default=DEFAULT_RHO, help="Marginal relaxation")
    group.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="Entropic weight")
    group.add_argument("--anchors", type=int, default=DEFAULT_ANCHORS, help="Anchors per stage")
    group.add_argument("--iters", type=int, default=DEFAULT_STAGES, help="Refinement stages")
    group.add_argument("--topk", type=int, default=DEFAULT_TOPK, help="Candidates per source")
    group.add_argument("--quantile", type=float, default=DEFAULT_QUANTILE, help="Cycle quantile")
    group.add_argument("--ranking", choices=["confidence", "combined"], default="confidence")
    group.add_argument("--solver", choices=sorted(SOLVER_FLAGS), default="textbook")
    group.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    group.add_argument("--tol", type=float, default=DEFAULT_TOL)
    group.add_argument(
        "--no-relaxed-cc", action="store_true", help="Keep every forward top-k candidate"
    )
    group.add_argument(
        "--raw-initial-cost",
        action="store_true",
        help="Solve stage 0 on the unnormalized semantic cost",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fgw-labels", description="FGW pseudo-label generation")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic pair bundle")
    p.add_argument("--scenario", choices=SCENARIO_KINDS, required=True)
    p.add_argument("--n", type=int, default=32, help="Source points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=16, help="Feature dimension")
    p.add_argument("--noise", type=float, default=0.0, help="3D jitter of target points")
    p.add_argument("--feature-noise", type=float, default=0.0)
    p.add_argument("--overlap", type=float, default=1.0, help="Fraction with a counterpart")
    p.add_argument("--alias", type=float, default=0.8, help="Fraction of aliased twin pairs")
    p.add_argument("--freq", type=float, default=3.0, help="Feature field frequency")
    p.add_argument("--bend", type=float, default=0.5)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("match", help="Run the pipeline and write plan, labels, diagnostics")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--bundle", type=Path)
    source.add_argument("--batch", type=Path, help=f"Directory of *{BUNDLE_SUFFIX} files")
    p.add_argument("--out-dir", type=Path, required=True)
    add_pipeline_args(p)
    p.set_defaults(handler=cmd_match)

    p = sub.add_parser("eval", help="Score labels or plans against ground truth")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--labels", type=Path)
    p.add_argument("--plan", type=Path)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--compare", action="store_true", help="Score all four methods per stage")
    add_pipeline_args(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("oracle", help="Exact GW value and permutation LP cross-check")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--plan", type=Path, help="Plan to score (default: identity)")
    p.add_argument("--epsilon", type=float, default=ORACLE_EPSILON)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("suite", help="Per-seed accuracy records on one synthetic scenario")
    p.add_argument("--scenario", choices=SCENARIO_KINDS, default="mirror_alias")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seeds", type=int, default=5, help="Number of seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--feature-noise", type=float, default=1e-3)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--alias", type=float, default=0.8)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--out", type=Path, default=None, help="Also write records as JSONL")
    add_pipeline_args(p)
    p.set_defaults(handler=cmd_suite)

    p = sub.add_parser("sweep", help="Accuracy over values of one hyperparameter")
    p.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.add_argument("--scenario", choices=SCENARIO_KINDS, default="mirror_alias")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seeds", type=int, default=5, help="Number of seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--feature-noise", type=float, default=1e-3)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--alias", type=float, default=0.8)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    add_pipeline_args(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("schema", help="Write JSON schemas of all text records")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_schema)

    p = sub.add_parser("validate", help="Check files written by this tool")
    p.add_argument("paths", type=Path, nargs="+")
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    setup_logging(args.verbose)

    try:
        return int(args.handler(args))
    except KeyboardInterrupt:
        log("Interrupted by user")
        return 130
    except FormatError as e:
        # Unreadable input file
        log(f"ERROR: {e}")
        return 1
    except ValueError as e:
        # FGWError and pydantic ValidationError included
        log(f"ERROR: {e}")
        return 2
    except OSError as e:
        log(f"ERROR: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
