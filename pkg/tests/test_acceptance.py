"""One test per acceptance criterion; each prints a single pass/fail line."""

import pytest

import conftest
from newcomblike import checks


@pytest.mark.parametrize("number", range(1, len(checks.CRITERIA) + 1))
def test_criterion(number):
    result = checks.CRITERIA[number - 1](seed=0)
    line = result.line()
    conftest.ACCEPTANCE_LINES.append((number, line))
    print(line)
    assert result.passed, result.details
