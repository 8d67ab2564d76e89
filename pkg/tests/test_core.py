import math

import numpy as np
import pytest
from helpers import naive_distances, random_points, random_rotation

from fgwlabels.core import minmax_normalize, pairwise_distances, semantic_cost
from fgwlabels.types import CostMatrix, FeatureMatrix, InputError, PointSet3D
from fgwlabels.utils import make_rng

MAX_ERR = 1e-12


def test_semantic_cost_examples():
    featA = FeatureMatrix(np.array([[1.0, 0.0]]))
    featB = FeatureMatrix(np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 1.0]]))
    cost = semantic_cost(featA, featB)

    assert cost.kind == "semantic"
    assert cost.shape == (1, 3)
    assert cost.data[0, 0] == pytest.approx(0.0, abs=MAX_ERR)
    assert cost.data[0, 1] == pytest.approx(2.0, abs=MAX_ERR)
    assert cost.data[0, 2] == pytest.approx(1.0 - 1.0 / math.sqrt(2.0), abs=MAX_ERR)


def test_semantic_cost_rejects_bad_input():
    with pytest.raises(InputError):
        semantic_cost(FeatureMatrix(np.ones((2, 3))), FeatureMatrix(np.ones((2, 4))))
    with pytest.raises(InputError):
        semantic_cost(FeatureMatrix(np.array([[1.0, 0.0], [0.0, 0.0]])), FeatureMatrix(np.eye(2)))


def test_semantic_cost_scale_invariant():
    rng = make_rng(5)
    a = rng.normal(size=(6, 4))
    b = rng.normal(size=(5, 4))
    scales = rng.uniform(0.1, 10.0, size=(6, 1))
    base = semantic_cost(FeatureMatrix(a), FeatureMatrix(b))
    scaled = semantic_cost(FeatureMatrix(a * scales), FeatureMatrix(b))
    np.testing.assert_allclose(scaled.data, base.data, rtol=0, atol=MAX_ERR)


def test_pairwise_distances_examples():
    single = pairwise_distances(PointSet3D(np.zeros((1, 3))))
    assert single.data.shape == (1, 1)
    assert single.data[0, 0] == 0.0

    pair = pairwise_distances(PointSet3D(np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])))
    assert pair.data[0, 1] == 5.0
    assert pair.data[1, 0] == 5.0


def test_pairwise_distances_match_double_loop():
    pts = random_points(4, 4)
    expected = np.array(naive_distances(pts.points.tolist()))
    dist = pairwise_distances(pts)

    np.testing.assert_allclose(dist.data, expected, rtol=0, atol=MAX_ERR)
    assert np.array_equal(dist.data, dist.data.T)
    assert np.all(np.diag(dist.data) == 0.0)


def test_pairwise_distances_rigid_invariance():
    pts = random_points(9, 12)
    moved = PointSet3D(pts.points @ random_rotation(9).T + np.array([0.5, -2.0, 3.0]))
    np.testing.assert_allclose(
        pairwise_distances(moved).data, pairwise_distances(pts).data, rtol=0, atol=1e-9
    )


def test_pairwise_distances_rejects_non_finite():
    with pytest.raises(InputError):
        PointSet3D(np.array([[0.0, np.nan, 0.0]]))


def test_minmax_normalize_examples():
    out = minmax_normalize(CostMatrix(np.array([[0.0, 1.0], [1.0, 2.0]]), kind="geometric"))
    assert out.kind == "geometric"
    np.testing.assert_array_equal(out.data, [[0.0, 0.5], [0.5, 1.0]])

    flat = minmax_normalize(CostMatrix(np.full((2, 2), 3.0), kind="fused"))
    np.testing.assert_array_equal(flat.data, np.zeros((2, 2)))


def test_minmax_normalize_range_and_idempotence():
    cost = CostMatrix(make_rng(2).uniform(0.3, 7.0, size=(5, 7)), kind="fused")
    once = minmax_normalize(cost)
    twice = minmax_normalize(once)

    assert once.data.min() == 0.0
    assert once.data.max() == 1.0
    np.testing.assert_allclose(twice.data, once.data, rtol=0, atol=MAX_ERR)


def test_minmax_normalize_rejects_empty():
    with pytest.raises(InputError):
        minmax_normalize(CostMatrix(np.zeros((0, 3)), kind="fused"))
