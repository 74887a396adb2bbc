"""Newcomblike decision problems: ex ante utility, self-locating beliefs, ratifiability."""

from .core import (
    ChainSolution,
    DecisionProblem,
    StateRecord,
    check_termination,
    ex_ante_eu,
    ex_ante_grad,
    solve_at,
    solve_chain,
    validate,
)
from .fixtures import load as load_fixture
from .problemfile import load_problem, save_problem

__all__ = [
    "ChainSolution",
    "DecisionProblem",
    "StateRecord",
    "check_termination",
    "ex_ante_eu",
    "ex_ante_grad",
    "load_fixture",
    "load_problem",
    "save_problem",
    "solve_at",
    "solve_chain",
    "validate",
]

__version__ = "0.1.0"
