import itertools
import math

import numpy as np
import pytest
from helpers import naive_uot_objective, random_cost, uniform

from fgwlabels.config import SolverConfig
from fgwlabels.sinkhorn import solve, solve_balanced, solve_unbalanced, uot_objective
from fgwlabels.types import CostMatrix, DiscreteMeasure, InputError, TransportPlan
from fgwlabels.utils import make_rng

BALANCED = SolverConfig(variant="balanced")
TEXTBOOK = SolverConfig(variant="uot_textbook")
PSEUDOCODE = SolverConfig(variant="uot_paper_pseudocode")


def lp_optimum(cost: np.ndarray) -> float:
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) / n for p in itertools.permutations(range(n)))


def test_balanced_picks_cheaper_permutation():
    cost = CostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), kind="fused")
    cfg = SolverConfig(variant="balanced", epsilon=0.01)
    plan, diag = solve_balanced(cost, uniform(2), uniform(2), cfg)

    np.testing.assert_allclose(np.diag(plan.data), [0.5, 0.5], atol=1e-9)
    assert plan.data[0, 1] < 1e-10
    assert plan.data[1, 0] < 1e-10
    assert diag.converged
    assert plan.solver == "balanced"


def test_balanced_large_epsilon_gives_independent_coupling():
    cost = random_cost(1, 3, 4)
    a = DiscreteMeasure(np.array([0.2, 0.3, 0.5]))
    b = uniform(4)
    plan, _ = solve_balanced(cost, a, b, SolverConfig(variant="balanced", epsilon=1e6))
    np.testing.assert_allclose(plan.data, np.outer(a.mass, b.mass), rtol=0, atol=1e-6)


def test_balanced_marginals_within_tolerance():
    cost = random_cost(2, 5, 6)
    plan, diag = solve_balanced(cost, uniform(5), uniform(6), BALANCED)
    assert diag.converged
    assert diag.row_marginal_err <= 10 * BALANCED.tol
    assert diag.col_marginal_err <= 10 * BALANCED.tol
    assert diag.transported_mass == pytest.approx(1.0, abs=1e-9)


def test_balanced_rejects_unnormalized_marginals():
    cost = random_cost(3, 2, 2)
    with pytest.raises(InputError):
        solve_balanced(cost, DiscreteMeasure(np.array([0.5, 0.6])), uniform(2), BALANCED)
    with pytest.raises(InputError):
        solve_balanced(cost, uniform(3), uniform(2), BALANCED)


def test_balanced_matches_permutation_lp():
    cfg = SolverConfig(variant="balanced", epsilon=0.01, max_iters=20000)
    for seed in range(50):
        cost = random_cost(seed, 3, 3)
        plan, _ = solve_balanced(cost, uniform(3), uniform(3), cfg)
        transport = float((cost.data * plan.data).sum())
        optimum = lp_optimum(cost.data)
        assert abs(transport - optimum) <= 0.02 * optimum, seed


def test_dual_trace_is_non_decreasing():
    for variant in ("balanced", "uot_textbook"):
        cfg = SolverConfig(variant=variant, epsilon=0.1, record_every=1, max_iters=2000)
        _, diag = solve(random_cost(4, 6, 6), uniform(6), uniform(6), cfg)
        trace = diag.dual_trace
        assert len(trace) >= 2
        assert all(later >= earlier - 1e-12 for earlier, later in zip(trace, trace[1:]))


def test_non_convergence_is_flagged_not_raised():
    cfg = SolverConfig(variant="balanced", epsilon=0.01, max_iters=1)
    plan, diag = solve_balanced(random_cost(5, 4, 4), uniform(4), uniform(4), cfg)
    assert not diag.converged
    assert diag.iterations_used == 1
    assert plan.data.shape == (4, 4)


def test_unbalanced_zero_cost_is_independent_coupling():
    cost = CostMatrix(np.zeros((3, 4)), kind="fused")
    a, b = uniform(3), uniform(4)
    plan, diag = solve_unbalanced(cost, a, b, TEXTBOOK)
    assert diag.converged
    np.testing.assert_allclose(plan.data, np.outer(a.mass, b.mass), rtol=0, atol=1e-8)


def test_unbalanced_large_rho_matches_balanced():
    for seed in range(20):
        cost = random_cost(seed, 4, 4)
        balanced, _ = solve_balanced(cost, uniform(4), uniform(4), BALANCED)
        relaxed, _ = solve_unbalanced(cost, uniform(4), uniform(4), SolverConfig(rho=1e6))
        np.testing.assert_allclose(relaxed.data, balanced.data, rtol=0, atol=1e-5)


def test_unbalanced_plan_is_local_minimum_of_entropic_objective():
    cost = random_cost(6, 3, 3)
    a, b = uniform(3), uniform(3)
    cfg = SolverConfig(rho=0.75, epsilon=1.0)
    plan, diag = solve_unbalanced(cost, a, b, cfg)
    assert diag.converged

    best = uot_objective(plan, cost, a, b, cfg.rho, epsilon=cfg.epsilon)
    rng = make_rng(6)
    for _ in range(50):
        step = np.exp(1e-3 * rng.normal(size=(3, 3)))
        moved = uot_objective(plan.data * step, cost, a, b, cfg.rho, epsilon=cfg.epsilon)
        assert moved >= best - 1e-12


def test_unbalanced_marginal_error_shrinks_with_rho():
    cost = random_cost(7, 4, 5)
    errors = []
    for rho in (0.1, 1.0, 10.0, 100.0):
        _, diag = solve_unbalanced(cost, uniform(4), uniform(5), SolverConfig(rho=rho))
        errors.append(diag.row_marginal_err + diag.col_marginal_err)
    assert errors == sorted(errors, reverse=True)
    assert len(set(errors)) == len(errors)


def test_unbalanced_plans_strictly_positive():
    cost = random_cost(8, 5, 5)
    for cfg in (TEXTBOOK, PSEUDOCODE):
        plan, _ = solve_unbalanced(cost, uniform(5), uniform(5), cfg)
        assert np.all(plan.data > 0)


def test_pseudocode_rows_match_at_unit_rho():
    cost = random_cost(9, 4, 4)
    a = uniform(4)
    cfg = SolverConfig(variant="uot_paper_pseudocode", rho=1.0)
    plan, diag = solve_unbalanced(cost, a, uniform(4), cfg)
    assert diag.converged
    np.testing.assert_allclose(plan.data.sum(axis=1), a.mass, rtol=0, atol=1e-6)


def test_pseudocode_row_sums_follow_fixed_point_form():
    cost = random_cost(10, 4, 4)
    a = uniform(4)
    rho = 0.75
    cfg = SolverConfig(variant="uot_paper_pseudocode", rho=rho)
    plan, diag = solve_unbalanced(cost, a, uniform(4), cfg)
    assert diag.converged

    # rows_i = a_i exp(u_i (1 - 1 / rho)) at the fixed point, likewise for columns
    u = np.log(plan.data.sum(axis=1) / a.mass) / (1.0 - 1.0 / rho)
    v = np.log(plan.data.sum(axis=0) / 0.25) / (1.0 - 1.0 / rho)
    rebuilt = np.exp(-cost.data / rho + u[:, None] + v[None, :])
    np.testing.assert_allclose(plan.data, rebuilt, rtol=1e-6)
    assert diag.row_marginal_err > 1e-6


def test_unbalanced_rejects_balanced_variant():
    with pytest.raises(InputError):
        solve_unbalanced(random_cost(11, 2, 2), uniform(2), uniform(2), BALANCED)


def test_uot_objective_examples():
    a, b = uniform(2), uniform(2)
    zero_cost = CostMatrix(np.zeros((2, 2)), kind="fused")
    rho = 0.75

    independent = np.outer(a.mass, b.mass)
    assert uot_objective(independent, zero_cost, a, b, rho) == pytest.approx(0.0, abs=1e-15)
    assert uot_objective(np.zeros((2, 2)), zero_cost, a, b, rho) == pytest.approx(2 * rho)


def test_uot_objective_matches_scalar_loop():
    rng = make_rng(12)
    plan = rng.uniform(0.0, 0.5, size=(2, 2))
    cost = random_cost(12, 2, 2)
    a, b = uniform(2), DiscreteMeasure(np.array([0.3, 0.7]))
    value = uot_objective(TransportPlan(plan), cost, a, b, 0.75)
    expected = naive_uot_objective(plan, cost.data, a.mass, b.mass, 0.75)
    assert value == pytest.approx(expected, rel=1e-12)


def test_uot_objective_infinite_on_zero_mass_target():
    a = uniform(2)
    b = DiscreteMeasure(np.array([1.0, 0.0]))
    plan = np.array([[0.25, 0.25], [0.25, 0.25]])
    cost = CostMatrix(np.zeros((2, 2)), kind="fused")
    assert uot_objective(plan, cost, a, b, 1.0) == math.inf


def test_solve_is_deterministic():
    cost = random_cost(13, 6, 5)
    first, _ = solve(cost, uniform(6), uniform(5), TEXTBOOK)
    second, _ = solve(cost, uniform(6), uniform(5), TEXTBOOK)
    assert np.array_equal(first.data, second.data)
