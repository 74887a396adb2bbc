import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import enumerate_histories
from newcomblike import fixtures
from newcomblike.core import (
    check_termination,
    ex_ante_eu,
    ex_ante_grad,
    finite_difference_grad,
    relabel,
    solve_at,
    solve_chain,
    validate,
)
from newcomblike.depfun import Constant
from newcomblike.errors import InvalidPolicy, TerminationError
from newcomblike.problemfile import problem_from_dict

ACYCLIC = ("newcomb", "newcomb75", "sbpd_v1", "sbpd_v2", "adversarial_offer", "wine", "staircase5", "nrho",
           "k3_nonsampleable")


def one_state(rows, utilities=None, dependants=None):
    """Single non-terminal state ``s`` whose action rows are given explicitly."""
    utilities = utilities or {"t": 0.0}
    doc = {
        "actions": [str(a) for a in range(len(rows))],
        "states": [{"id": "s", "dependant": 0}] + [{"id": t, "terminal": True, "utility": u} for t, u in utilities.items()],
        "initial": {"s": 1.0},
        "transitions": {f"s/{a}": row for a, row in enumerate(rows)},
        "dependants": dependants or [{"kind": "identity"}],
    }
    return problem_from_dict(doc)


def test_sbpd_fixture_is_valid_and_terminates(problems):
    for name, problem in problems.items():
        assert validate(problem) == [], name
        assert check_termination(problem).terminates, name


def test_row_sum_violation_reported_once():
    problem = one_state([{"t": 0.9}, {"t": 1.0}])
    codes = [d.code for d in validate(problem)]
    assert codes == ["row-sum"]


def test_missing_utility_reported_once():
    doc = {
        "actions": ["a"],
        "states": [{"id": "s", "dependant": 0}, {"id": "t", "terminal": True}],
        "initial": {"s": 1.0},
        "transitions": {"s/a": {"t": 1.0}},
        "dependants": [{"kind": "identity"}],
    }
    assert [d.code for d in validate(problem_from_dict(doc))] == ["missing-utility"]


def test_self_loop_is_a_trapping_set():
    problem = one_state([{"s": 1.0}, {"s": 1.0}])
    verdict = check_termination(problem)
    assert not verdict.terminates
    assert verdict.trapping_states == ("s",)


def test_adversarial_pure_policy_witness():
    problem = one_state([{"s": 1.0}, {"t": 1.0}])
    verdict = check_termination(problem)
    assert verdict.witness_policy == (0,)
    assert verdict.trapping_states == ("s",)
    # the mixed policy still terminates; the pure loop does not
    assert solve_at(problem, [0.5, 0.5]).visit_counts[0] == pytest.approx(2.0)
    with pytest.raises(TerminationError):
        solve_at(problem, [1.0, 0.0])


def test_one_step_absorption():
    sol = solve_at(one_state([{"t": 1.0}]), [1.0])
    assert sol.visit_counts.tolist() == [1.0]
    assert sol.ex_ante_eu == 0.0


def test_sbpd_v1_pure_c_visits_and_utility(problems):
    problem = problems["sbpd_v1"]
    joint = [[1.0, 0.0], [5 / 6, 1 / 6]]
    sol = solve_chain(problem, joint)
    assert sol.ex_ante_eu == pytest.approx(25 / 12, abs=1e-12)
    want = {"Th0": 1.0, "ThC": 5 / 6, "ThD": 1 / 6, "DoC": 25 / 36, "DoD": 11 / 36}
    got = sol.visits(problem)
    for sid, v in want.items():
        assert got[sid] == pytest.approx(v, abs=1e-12)
    visits, eu = enumerate_histories(problem, joint)
    assert eu == pytest.approx(25 / 12, abs=1e-12)
    for sid, v in visits.items():
        assert got[sid] == pytest.approx(v, abs=1e-12)


@pytest.mark.parametrize("name", ACYCLIC)
def test_visits_match_history_enumeration(problems, name):
    problem = problems[name]
    for pi in fixtures.random_policies(problem.num_actions, 5, seed=3):
        joint = problem.dependence_policies(pi)
        sol = solve_chain(problem, joint)
        visits, eu = enumerate_histories(problem, joint)
        assert sol.ex_ante_eu == pytest.approx(eu, abs=1e-12 * max(1.0, abs(eu)))
        np.testing.assert_allclose(sol.visit_counts, [visits[s] for s in problem.nonterminal_ids], atol=1e-12)


def test_ex_ante_values_from_closed_forms(problems):
    assert ex_ante_eu(problems["sbpd_v2"], [1, 0]) == pytest.approx(2.9, abs=1e-12)
    assert ex_ante_eu(problems["newcomb75"], [1, 0]) == pytest.approx(750_000, rel=1e-12)
    assert ex_ante_eu(problems["newcomb75"], [0, 1]) == pytest.approx(251_000, rel=1e-12)
    for p in np.linspace(0, 1, 11):
        # v2: Theodora's first component is sqrt(0.1 + 0.8p); utility (3 - 2)(0.8p + 0.1) + 2
        assert ex_ante_eu(problems["sbpd_v2"], [p, 1 - p]) == pytest.approx(0.8 * p + 0.1 + 2, abs=1e-12)


def test_sbpd_v1_at_p0_matches_appendix_formula(problems):
    p = 0.0
    formula = 2 * (1 - p) + 3 * (1 / 6 + 2 * p**2 - (4 / 3) * p**3) ** 2
    assert ex_ante_eu(problems["sbpd_v1"], [p, 1 - p]) == pytest.approx(25 / 12, abs=1e-12)
    assert formula == pytest.approx(25 / 12, abs=1e-12)


def test_sbpd_v2_gradient_closed_form(problems):
    problem = problems["sbpd_v2"]
    for p in (0.1, 0.37, 0.8):
        g = ex_ante_grad(problem, [p, 1 - p])
        np.testing.assert_allclose(g, [0.8 * (1 - p), -0.8 * p], atol=1e-10)


def test_sbpd_v1_gradient_closed_form(problems):
    problem = problems["sbpd_v1"]
    for p in np.linspace(0.0, 1.0, 21):
        g = ex_ante_grad(problem, [p, 1 - p])
        quintic = 32 * p**5 - 80 * p**4 + 48 * p**3 - 4 * p**2 + 4 * p - 2
        assert g[0] == pytest.approx((1 - p) * quintic, abs=1e-10)


def test_constant_dependence_has_zero_gradient(problems):
    base = problems["sbpd_v1"]
    const = [Constant([0.3, 0.7]), Constant([0.6, 0.4])]
    from newcomblike.cdt import replace_dependence

    problem = replace_dependence(base, const)
    for pi in fixtures.random_policies(2, 5, seed=0):
        np.testing.assert_allclose(ex_ante_grad(problem, pi), 0.0, atol=1e-15)


@pytest.mark.parametrize("name", fixtures.DIFFERENTIABLE)
def test_gradient_matches_finite_differences(problems, name):
    problem = problems[name]
    scale = max(1.0, float(np.abs(problem.arrays.utilities).max()))
    for pi in fixtures.random_policies(problem.num_actions, 50, seed=11):
        g = ex_ante_grad(problem, pi)
        fd = finite_difference_grad(problem, pi)
        np.testing.assert_allclose(g / scale, fd / scale, atol=1e-5)
        assert abs(pi @ g) <= 1e-9 * scale


def test_null_direction_at_vertices(problems):
    for name in fixtures.DIFFERENTIABLE:
        problem = problems[name]
        for a in range(problem.num_actions):
            pi = np.eye(problem.num_actions)[a]
            assert ex_ante_grad(problem, pi)[a] == 0.0


@given(st.permutations(range(9)), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_relabeling_leaves_utility_unchanged(order, p):
    problem = fixtures.build("sbpd_v1")
    mapping = {s.id: f"q{i}" for i, s in enumerate(problem.states)}
    renamed = relabel(problem, mapping, list(order))
    assert ex_ante_eu(renamed, [p, 1 - p]) == pytest.approx(ex_ante_eu(problem, [p, 1 - p]), abs=1e-12)


def test_bad_joint_policy_rejected(problems):
    with pytest.raises(InvalidPolicy):
        solve_chain(problems["sbpd_v1"], [[1.0, 0.0]])
    with pytest.raises(InvalidPolicy):
        solve_at(problems["sbpd_v1"], [0.5, 0.4])
