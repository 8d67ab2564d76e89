import numpy as np
import pytest
from helpers import naive_metrics

from fgwlabels.config import SCENARIO_KINDS, PipelineConfig, Scenario
from fgwlabels.core import pairwise_distances, semantic_cost
from fgwlabels.gw import gw_objective_exact
from fgwlabels.pipeline import extract_pseudo_labels, run_pipeline
from fgwlabels.synth import (
    SWEEP_PARAMS,
    embed,
    evaluate,
    generate,
    grid_layout,
    ground_truth_plan,
    override,
    run_suite,
    sweep,
)
from fgwlabels.types import InputError, PointSet3D

RADIUS = 0.1


def test_grid_layout_twins():
    uv, h = grid_layout(15)
    assert uv.shape == (15, 2)
    assert h > 0
    np.testing.assert_array_equal(uv[0:14:2, 0], -uv[1:14:2, 0])
    np.testing.assert_array_equal(uv[0:14:2, 1], uv[1:14:2, 1])
    assert len({tuple(p) for p in uv}) == 15


def test_embedding_keeps_mirror_an_isometry():
    uv, _ = grid_layout(20)
    mirrored = uv * np.array([-1.0, 1.0])
    before = pairwise_distances(PointSet3D(embed(uv, 0.5))).data
    after = pairwise_distances(PointSet3D(embed(mirrored, 0.5))).data
    np.testing.assert_allclose(after, before, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_generate_is_deterministic(kind):
    scn = Scenario(kind=kind, n_points=12, seed=5, noise_sigma=0.01, overlap_fraction=0.5)
    first_prob, first_gt = generate(scn)
    second_prob, second_gt = generate(scn)

    assert np.array_equal(first_prob.featB.data, second_prob.featB.data)
    assert np.array_equal(first_prob.ptsB.points, second_prob.ptsB.points)
    assert first_gt == second_gt
    values = list(first_gt.assignment.values())
    assert len(values) == len(set(values))


def test_rigid_semantic_cost_has_strict_minimum_at_ground_truth():
    for seed in range(5):
        prob, gt = generate(Scenario(kind="rigid", n_points=24, seed=seed))
        cost = semantic_cost(prob.featA, prob.featB).data
        for i, j in gt.assignment.items():
            others = np.delete(cost[i], j)
            assert cost[i, j] < others.min()


def test_rigid_target_is_isometric_copy(rigid_pair):
    prob, gt = rigid_pair
    order = [gt.assignment[i] for i in range(prob.n)]
    dA = pairwise_distances(prob.ptsA).data
    dB = pairwise_distances(prob.ptsB).data
    np.testing.assert_allclose(dB[np.ix_(order, order)], dA, rtol=0, atol=1e-9)


def test_mirror_alias_twins_are_semantically_identical():
    prob, gt = generate(Scenario(kind="mirror_alias", n_points=16, seed=2, alias_fraction=1.0))
    cost = semantic_cost(prob.featA, prob.featB).data
    feats = prob.featB.data
    for k in range(8):
        left, right = gt.assignment[2 * k], gt.assignment[2 * k + 1]
        assert np.array_equal(feats[left], feats[right])
        np.testing.assert_allclose(cost[:, left], cost[:, right], rtol=0, atol=1e-12)


def test_mirror_alias_leaves_unaliased_twins_distinct():
    prob, _ = generate(Scenario(kind="mirror_alias", n_points=16, seed=2, alias_fraction=0.5))
    feats = prob.featA.data
    identical = [k for k in range(8) if np.array_equal(feats[2 * k], feats[2 * k + 1])]
    assert len(identical) == 4


def test_partial_overlap_counts():
    scn = Scenario(kind="partial_overlap", n_points=32, seed=1, overlap_fraction=0.5)
    prob, gt = generate(scn)
    assert prob.n == prob.m == 32
    assert len(gt.assignment) == 16
    assert len(gt.unmatched_sources) == 16
    assert len(gt.unmatched_targets) == 16


def test_broken_structure_distorts_geometry():
    prob, gt = generate(Scenario(kind="broken_structure", n_points=16, seed=4))
    plan = ground_truth_plan(gt, prob.n, prob.m)
    value = gw_objective_exact(plan, pairwise_distances(prob.ptsA), pairwise_distances(prob.ptsB))
    assert value > 1e-3


def test_ground_truth_plan():
    scn = Scenario(kind="partial_overlap", n_points=8, seed=0, overlap_fraction=0.5)
    prob, gt = generate(scn)
    plan = ground_truth_plan(gt, prob.n, prob.m)
    assert plan.data.sum() == pytest.approx(0.5)
    assert np.count_nonzero(plan.data) == 4


def test_evaluate_ground_truth_and_empty(rigid_pair):
    prob, gt = rigid_pair
    truth = [(i, j, 1.0) for i, j in sorted(gt.assignment.items())]
    perfect = evaluate(truth, gt, RADIUS, prob.ptsB)
    assert (perfect.precision, perfect.recall, perfect.accuracy) == (1.0, 1.0, 1.0)
    assert perfect.emitted == perfect.assigned == prob.n

    empty = evaluate([], gt, RADIUS, prob.ptsB)
    assert empty.precision is None
    assert empty.recall == 0.0
    assert empty.to_dict()["precision"] is None


def test_evaluate_matches_scalar_loop(rigid_pair):
    prob, gt = rigid_pair
    cfg = PipelineConfig(iters_T=1)
    labels = extract_pseudo_labels(run_pipeline(prob, cfg).plan, cfg)
    metrics = evaluate(labels, gt, RADIUS, prob.ptsB)
    precision, recall, accuracy = naive_metrics(
        labels.matches(), dict(gt.assignment), RADIUS, prob.ptsB.points
    )
    assert metrics.precision == precision
    assert metrics.recall == recall
    assert metrics.accuracy == accuracy
    assert metrics.emitted == len(labels.matches())


def test_evaluate_rejects_bad_input(rigid_pair):
    prob, gt = rigid_pair
    with pytest.raises(InputError):
        evaluate([], gt, 0.0, prob.ptsB)
    with pytest.raises(InputError):
        evaluate([(0, prob.m, 1.0)], gt, RADIUS, prob.ptsB)


def test_run_suite_records():
    template = Scenario(kind="partial_overlap", n_points=8, overlap_fraction=0.5)
    records = run_suite(template, [0, 1], PipelineConfig(iters_T=1))
    assert [r["seed"] for r in records] == [0, 1]
    for record in records:
        assert record["kind"] == "partial_overlap"
        assert len(record["stage_accuracy"]) == 2
        assert len(record["stage_label_precision"]) == 2
        assert record["label_precision"] == record["stage_label_precision"][-1]
        assert record["improved"] == (record["pipeline_accuracy"] > record["semantic_accuracy"])
        assert record["semantic_accuracy"] == record["stage_accuracy"][0]
        assert record["pipeline_accuracy"] == record["stage_accuracy"][-1]
        assert record["fallback_stages"] == 0
        assert record["unmatched_target_mass"] >= 0.0


def test_override():
    cfg = PipelineConfig()
    assert override(cfg, "rho", 0.5).solver.rho == 0.5
    assert override(cfg, "k", 8).anchor.k == 8
    assert override(cfg, "iters", 2).iters_T == 2
    assert set(SWEEP_PARAMS) >= {"k", "alpha", "rho"}
    with pytest.raises(InputError):
        override(cfg, "k", 2.5)
    with pytest.raises(InputError):
        override(cfg, "gamma", 1.0)
    with pytest.raises(ValueError):
        override(cfg, "alpha", 2.0)


def test_sweep_one_record_per_value():
    template = Scenario(kind="rigid", n_points=8)
    out = sweep("alpha", [0.0, 0.3], template, [0], PipelineConfig(iters_T=1))
    assert [r["value"] for r in out] == [0.0, 0.3]
    assert all(r["seeds"] == 1 for r in out)
    assert out[0]["pipeline_accuracy"] == out[0]["semantic_accuracy"]
