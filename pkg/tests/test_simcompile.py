import numpy as np
import pytest

from newcomblike import fixtures
from newcomblike.errors import CapExceeded
from newcomblike.problemfile import load_document, problem_from_dict, problem_to_dict, save_problem
from newcomblike.simcompile import (
    expand_problem,
    ratifiability_agrees,
    tree_credences,
    verify_expansion,
)
from newcomblike.depfun import SimulationFunction


def identity_samplers(k, n):
    return [SimulationFunction(k, 1, counts={tuple(np.eye(k, dtype=int)[a]): np.eye(k)[a] for a in range(k)})
            for _ in range(n)]


@pytest.fixture(scope="module")
def v1():
    problem = fixtures.build("sbpd_v1")
    samplers = fixtures.ggt_samplers(problem)
    return problem, samplers, expand_problem(problem, samplers)


def test_theodora_states_become_seven_state_trees(v1):
    problem, _, expanded = v1
    for s in ("Th0", "ThC", "ThD"):
        assert len(expanded.trees[s]) == 7
    for s in ("DoC", "DoD"):
        assert expanded.trees[s] == (s,)
    assert expanded.problem.is_all_identity()
    assert expanded.back_map["Th0[C.D]"] == ("Th0", ("C", "D"))


def test_leaf_transition_mixes_next_trees(v1):
    _, _, expanded = v1
    row = expanded.problem.transitions[("Th0[C.D]", 0)]
    assert row == pytest.approx({"ThC": 5 / 6, "ThD": 1 / 6})


def test_tree_credences_at_pure_cooperation(v1):
    problem, _, expanded = v1
    cred = tree_credences(expanded, [1.0, 0.0])
    F2 = problem.dependence[1]([1.0, 0.0])
    assert cred["Th0"] == pytest.approx(3 / 7, abs=1e-12)
    assert cred["ThC"] == pytest.approx(3 * F2[0] / 7, abs=1e-12)
    assert cred["ThD"] == pytest.approx(3 * F2[1] / 7, abs=1e-12)


@pytest.mark.parametrize("name", ("sbpd_v1", "adversarial_offer", "newcomb75"))
def test_expansion_checks_pass(name):
    problem = fixtures.build(name)
    samplers = fixtures.ggt_samplers(problem)
    expanded = expand_problem(problem, samplers)
    for pi in fixtures.random_policies(problem.num_actions, 20, seed=13):
        report = verify_expansion(problem, expanded, samplers, pi)
        assert report.passed, report.to_report()


def test_depth_one_identity_expansion_is_a_copy():
    problem = fixtures.build("newcomb75")
    expanded = expand_problem(problem, identity_samplers(2, 1))
    assert problem_to_dict(expanded.problem)["transitions"] == problem_to_dict(problem)["transitions"]
    report = verify_expansion(problem, expanded, identity_samplers(2, 1), [0.3, 0.7])
    assert report.passed
    assert max(c.error for c in report.checks) <= 1e-15 * 1_000_000


def test_second_identity_expansion_is_a_no_op(v1):
    _, _, expanded = v1
    again = expand_problem(expanded.problem, identity_samplers(2, 1))
    first, second = problem_to_dict(expanded.problem), problem_to_dict(again.problem)
    assert first["states"] == second["states"]
    assert first["transitions"] == second["transitions"]


def test_ratifiability_verdicts_agree(v1):
    problem, samplers, expanded = v1
    from newcomblike.cdt import find_stationary

    policies = [np.eye(2)[0], np.eye(2)[1]] + list(fixtures.random_policies(2, 20, seed=14))
    policies += [e.policy for e in find_stationary(problem)]
    for pi in policies:
        a, b = ratifiability_agrees(problem, expanded, samplers, pi)
        assert a == b


def test_cap_errors_instead_of_truncating(v1):
    problem, samplers, _ = v1
    with pytest.raises(CapExceeded):
        expand_problem(problem, samplers, cap=10)


def test_expanded_problem_file_round_trip(v1, tmp_path):
    _, _, expanded = v1
    path = tmp_path / "expanded.json"
    save_problem(expanded.problem, path, extra={"back_map": expanded.back_map_section()})
    doc = load_document(path)
    assert doc["back_map"]["Th0[C.D]"] == {"state": "Th0", "prefix": ["C", "D"]}
    again = problem_from_dict(doc)
    assert problem_to_dict(again) == problem_to_dict(expanded.problem)
