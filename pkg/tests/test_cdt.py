import math

import numpy as np
import pytest

from newcomblike import fixtures
from newcomblike.anthropics import BeliefSystem, ggt_beliefs, ggt_components, gsgt_beliefs, gt_beliefs
from newcomblike.cdt import (
    SolverConfig,
    cdt_eu,
    cdt_eus,
    convergence_sequence,
    find_stationary,
    grad_identity_residual,
    impossibility_check,
    is_ratifiable,
    optimize_ex_ante,
    replace_dependence,
    satisfies_gradient_condition,
)
from newcomblike.checks import hand_built_wine_beliefs
from newcomblike.core import ex_ante_eu
from newcomblike.depfun import Constant
from newcomblike.errors import AnchorMismatch, NotDifferentiable
from newcomblike.problemfile import problem_from_dict


def quintic(p):
    return 32 * p**5 - 80 * p**4 + 48 * p**3 - 4 * p**2 + 4 * p - 2


def flat_problem():
    doc = {
        "actions": ["a", "b"],
        "states": [{"id": "s", "dependant": 0}, {"id": "t", "terminal": True, "utility": 3.0},
                   {"id": "u", "terminal": True, "utility": 3.0}],
        "initial": {"s": 1.0},
        "transitions": {"s/a": {"t": 1.0}, "s/b": {"u": 1.0}},
        "dependants": [{"kind": "identity"}],
    }
    return problem_from_dict(doc)


def test_gsgt_advantage_is_a_seventh_of_the_quintic(problems):
    problem = problems["sbpd_v1"]
    samplers = fixtures.ggt_samplers(problem)
    for p in np.linspace(0, 1, 11):
        beliefs = gsgt_beliefs(problem, samplers, [p, 1 - p])
        adv = cdt_eu(problem, beliefs, [p, 1 - p], "C") - cdt_eu(problem, beliefs, [p, 1 - p], "D")
        assert adv == pytest.approx(quintic(p) / 7, abs=1e-12)


def test_constant_transforms_make_actions_equal(problems):
    problem = problems["sbpd_v1"]
    pi = np.array([0.3, 0.7])
    n = len(problem.nonterminal_ids)
    tau = np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.2, 0.8], [0.2, 0.8]]])
    beliefs = BeliefSystem("hand-built", np.full(n, 1 / n), tau, pi)
    eus = cdt_eus(problem, beliefs)
    assert eus[0] == pytest.approx(eus[1], abs=1e-15)


def test_beliefs_used_at_another_policy_are_rejected(problems):
    problem = problems["sbpd_v2"]
    beliefs = ggt_beliefs(problem, [0.5, 0.5])
    with pytest.raises(AnchorMismatch):
        cdt_eus(problem, beliefs, [0.6, 0.4])


def test_ratifiability_examples(problems):
    v1 = problems["sbpd_v1"]
    samplers = fixtures.ggt_samplers(v1)
    assert is_ratifiable(v1, gsgt_beliefs(v1, samplers, [0, 1])).ratifiable
    report = is_ratifiable(v1, gsgt_beliefs(v1, samplers, [1, 0]))
    assert not report.ratifiable
    assert report.eus[0] - report.eus[1] == pytest.approx(-2 / 7, abs=1e-12)
    v2 = problems["sbpd_v2"]
    assert is_ratifiable(v2, ggt_beliefs(v2, [1, 0])).ratifiable


@pytest.mark.parametrize("name", ("sbpd_v1", "sbpd_v2"))
def test_gradient_identity(problems, name):
    problem = problems[name]
    for pi in fixtures.random_policies(2, 20, seed=9):
        assert grad_identity_residual(problem, pi) < 1e-7


def test_gradient_identity_with_constant_dependence(problems):
    problem = replace_dependence(problems["sbpd_v1"], [Constant([0.4, 0.6]), Constant([0.1, 0.9])])
    for pi in fixtures.random_policies(2, 5, seed=0):
        assert grad_identity_residual(problem, pi) == 0.0


@pytest.mark.parametrize("name", fixtures.DIFFERENTIABLE)
def test_residual_small_on_every_differentiable_fixture(problems, name):
    problem = problems[name]
    scale = max(1.0, float(np.abs(problem.arrays.utilities).max()))
    for pi in fixtures.random_policies(problem.num_actions, 20, seed=10):
        assert grad_identity_residual(problem, pi) < 1e-6 * scale


def test_sbpd_v1_stationary_set(problems):
    found = find_stationary(problems["sbpd_v1"])
    ps = sorted(float(x[0]) for x in found.policies)
    assert len(ps) == 3
    assert ps[0] == 0.0
    assert ps[1] == pytest.approx(0.36, abs=0.01) and ps[2] == pytest.approx(0.88, abs=0.01)
    for p in ps[1:]:
        assert abs(quintic(p)) < 1e-9
    assert all(e.ggt_ratifiable for e in found)
    best = [e for e in found if e.classification == "ex-ante-max"]
    assert len(best) == 1 and best[0].policy[0] == pytest.approx(0.8833, abs=1e-3)


def test_sbpd_v2_stationary_set_is_pure_cooperation(problems):
    found = find_stationary(problems["sbpd_v2"])
    assert len(found) == 1
    np.testing.assert_allclose(found.policies[0], [1.0, 0.0])


def test_constant_utility_is_everywhere_stationary():
    found = find_stationary(flat_problem())
    assert found.everywhere_stationary


def test_stationary_set_ignores_weight_choice(problems):
    problem = problems["sbpd_v1"]
    base = find_stationary(problem)
    for shift in (lambda g: g + 1.0, lambda g: 2 * g + 1.0):
        # weights are per policy; pick one that clears the minimum everywhere on the edge
        gammas = np.max([ggt_components(problem, [p, 1 - p]).gamma for p in np.linspace(0, 1, 201)], axis=0)
        other = find_stationary(problem, rho_override=list(shift(gammas)))
        assert len(other) == len(base)
        for a, b in zip(base.policies, other.policies):
            assert np.abs(a - b).max() < 1e-6
        assert all(e.ggt_ratifiable for e in other)


def test_ratifiable_iff_gradient_condition_under_gt(problems):
    for name in ("newcomb", "newcomb75"):
        problem = problems[name]
        for pi in list(np.eye(2)) + list(fixtures.random_policies(2, 30, seed=12)):
            verdict = is_ratifiable(problem, gt_beliefs(problem, pi)).ratifiable
            assert verdict == satisfies_gradient_condition(problem, pi)


def test_optimum_of_sbpd_v1(problems):
    optima = optimize_ex_ante(problems["sbpd_v1"])
    assert len(optima) == 1
    assert optima.policies[0][0] == pytest.approx(0.88, abs=0.01)


def test_adversarial_offer_optimum(problems):
    problem = problems["adversarial_offer"]
    optima = optimize_ex_ante(problem)
    theta_star = 0.5 + 0.5 / math.sqrt(3)
    thetas = sorted(float(x[0] / (x[0] + x[1])) for x in optima.policies)
    assert thetas == pytest.approx([1 - theta_star, theta_star], abs=1e-4)
    for x in optima.policies:
        assert 1 - x[2] == pytest.approx(0.046, abs=0.005)
        assert is_ratifiable(problem, ggt_beliefs(problem, x)).ratifiable


def test_every_optimum_is_ggt_ratifiable(problems):
    for name in ("sbpd_v1", "sbpd_v2", "newcomb75", "nrho"):
        problem = problems[name]
        for x in optimize_ex_ante(problem).policies:
            assert is_ratifiable(problem, ggt_beliefs(problem, x)).ratifiable, name


def test_wine_optimum_is_never_drink(problems):
    problem = problems["wine"]
    optima = optimize_ex_ante(problem)
    assert len(optima) == 1
    np.testing.assert_allclose(optima.policies[0], [0.0, 1.0])
    assert optima.max_value == 0.0
    with pytest.raises(NotDifferentiable):
        find_stationary(problem)


def test_wine_impossibility(problems):
    problem = problems["wine"]
    never = np.array([0.0, 1.0])
    fanciful = BeliefSystem("fanciful", np.array([0.0, 1.0, 0.0]), np.repeat(np.eye(2)[None], 2, axis=0), never)
    report = impossibility_check(problem, [
        ("GGT", ggt_beliefs),
        ("hand-built", hand_built_wine_beliefs(problem, never)),
        ("fanciful", fanciful),
    ], never)
    outcomes = {o.name: o for o in report.outcomes}
    assert not outcomes["GGT"].applicable and outcomes["GGT"].reason == "derivative unavailable"
    hand = outcomes["hand-built"]
    assert hand.faithful and not hand.fanciful and not hand.ratifiable
    assert outcomes["fanciful"].fanciful
    assert report.passed


def test_convergence_for_an_already_sampleable_map(problems):
    problem = problems["sbpd_v1"]
    config = SolverConfig(grid=400)
    steps = convergence_sequence(problem, [4, 8], config)
    assert all(s.approximated == [] and s.sup_error == 0.0 for s in steps)
    a, b = (s.stationary.policies for s in steps)
    assert len(a) == len(b) == 3
    assert max(np.abs(x - y).max() for x, y in zip(a, b)) < 1e-9


def test_convergence_toward_pure_cooperation(problems):
    problem = problems["sbpd_v2"]
    steps = convergence_sequence(problem, [4, 16, 64], SolverConfig(grid=400))
    errs = [s.sup_error for s in steps]
    assert errs[0] > errs[1] > errs[2]
    assert steps[-1].distance_to_optima <= 0.02
    adv = steps[-1].vertex_advantage["C"]
    assert adv == pytest.approx(0.8 / 129, rel=0.3)


def test_grid_optimum_matches_brute_force(problems):
    problem = problems["sbpd_v1"]
    grid = np.linspace(0, 1, 20001)
    brute = max(ex_ante_eu(problem, [p, 1 - p]) for p in grid)
    assert optimize_ex_ante(problem).max_value == pytest.approx(brute, abs=1e-8)
