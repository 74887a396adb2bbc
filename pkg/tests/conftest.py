import numpy as np
import pytest

from newcomblike import fixtures

ACCEPTANCE_LINES: list[tuple[int, str]] = []


def enumerate_histories(problem, joint_policy, max_len=50):
    """Brute-force walk over every history of an acyclic problem.

    Returns expected visit counts per non-terminal state and expected
    terminal utility, summed over histories with their probabilities.
    """
    joint = np.atleast_2d(joint_policy)
    records = {s.id: s for s in problem.states}
    visits = {sid: 0.0 for sid in problem.nonterminal_ids}
    eu = 0.0
    stack = [(sid, p, 1) for sid, p in problem.initial.items() if p > 0]
    while stack:
        sid, prob, depth = stack.pop()
        assert depth <= max_len, "history enumeration ran too deep; the problem is not acyclic"
        rec = records[sid]
        if rec.terminal:
            eu += prob * rec.utility
            continue
        visits[sid] += prob
        pi = joint[rec.dependant]
        for a, pa in enumerate(pi):
            if pa == 0:
                continue
            for target, q in problem.transitions[(sid, a)].items():
                if q > 0:
                    stack.append((target, prob * pa * q, depth + 1))
    return visits, eu


@pytest.fixture(scope="session")
def problems():
    return {name: fixtures.load(name).problem for name in fixtures.names()}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
