"""Decision problems as absorbing Markov chains.

A problem has non-terminal states, each owned by a dependant whose policy is
``F_j(pi0)``, and terminal states carrying utilities.  Everything exact about
a fixed policy (expected visit counts, state values, ex ante expected
utility and its directional derivatives) comes from two dense linear solves
with the fundamental matrix ``I - Q``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .depfun import DependenceFunction
from .errors import CapExceeded, InvalidPolicy, ProblemFormatError, TerminationError
from .simplex import as_policy

PIVOT_TOL = 1e-12
ROW_TOL = 1e-9
TERMINATION_CAP = 10**6


@dataclass(frozen=True)
class StateRecord:
    id: str
    terminal: bool
    utility: float | None = None
    dependant: int | None = None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    location: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.location}: {self.message}"


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """Finite absorbing decision process.

    ``transitions`` maps ``(state id, action index)`` to a dict of successor
    probabilities; ``dependence[j]`` gives dependant ``j``'s policy as a
    function of the agent's.  Dependant indices are 0-based.
    """

    actions: tuple[str, ...]
    states: tuple[StateRecord, ...]
    initial: Mapping[str, float]
    transitions: Mapping[tuple[str, int], Mapping[str, float]]
    dependence: tuple[DependenceFunction, ...]
    name: str = ""

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def num_dependants(self) -> int:
        return len(self.dependence)

    def action_index(self, action) -> int:
        if isinstance(action, (int, np.integer)):
            if not 0 <= action < self.num_actions:
                raise InvalidPolicy(f"no action {action}")
            return int(action)
        try:
            return self.actions.index(action)
        except ValueError:
            raise InvalidPolicy(f"unknown action {action!r}") from None

    @cached_property
    def nonterminal_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.states if not s.terminal)

    @cached_property
    def terminal_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.states if s.terminal)

    @cached_property
    def arrays(self) -> "ChainArrays":
        problems = validate(self)
        if problems:
            raise ProblemFormatError("invalid problem: " + "; ".join(map(str, problems[:5])))
        return ChainArrays.build(self)

    def dependence_policies(self, agent_policy) -> np.ndarray:
        """Joint policy ``(F_1(pi0), ..., F_n(pi0))`` as an ``n x |A|`` array."""
        p = as_policy(agent_policy, self.num_actions)
        return np.array([F(p) for F in self.dependence])

    def is_all_identity(self) -> bool:
        return all(F.is_identity() for F in self.dependence)

    def is_differentiable(self) -> bool:
        return all(F.differentiable for F in self.dependence)


@dataclass(frozen=True)
class ChainArrays:
    """Dense arrays for a validated problem, non-terminals first."""

    to_nonterminal: np.ndarray  # (n_nt, |A|, n_nt)
    to_terminal: np.ndarray  # (n_nt, |A|, n_t)
    utilities: np.ndarray  # (n_t,)
    owner: np.ndarray  # (n_nt,) dependant index
    start: np.ndarray  # (n_nt,)

    @classmethod
    def build(cls, problem: DecisionProblem) -> "ChainArrays":
        nt, t = problem.nonterminal_ids, problem.terminal_ids
        col = {sid: i for i, sid in enumerate(nt + t)}
        k = problem.num_actions
        full = np.zeros((len(nt), k, len(nt) + len(t)))
        for i, sid in enumerate(nt):
            for a in range(k):
                for target, prob in problem.transitions[(sid, a)].items():
                    full[i, a, col[target]] += prob
        records = {s.id: s for s in problem.states}
        return cls(
            to_nonterminal=full[:, :, : len(nt)],
            to_terminal=full[:, :, len(nt) :],
            utilities=np.array([records[sid].utility for sid in t], dtype=float),
            owner=np.array([records[sid].dependant for sid in nt], dtype=np.int64),
            start=np.array([problem.initial.get(sid, 0.0) for sid in nt], dtype=float),
        )

    def one_step_values(self, state_values: np.ndarray) -> np.ndarray:
        """``q[s, a] = sum_s' T(s'|s,a) V(s')`` given values of all states."""
        n = self.to_nonterminal.shape[0]
        return self.to_nonterminal @ state_values[:n] + self.to_terminal @ state_values[n:]


@dataclass(frozen=True)
class ChainSolution:
    """Exact chain quantities under one joint policy.

    ``state_values`` covers non-terminals first, then terminals (whose value
    is their utility), matching ``problem.nonterminal_ids + terminal_ids``.
    """

    visit_counts: np.ndarray
    state_values: np.ndarray
    ex_ante_eu: float
    joint_policy: np.ndarray

    def visits(self, problem: DecisionProblem) -> dict[str, float]:
        return dict(zip(problem.nonterminal_ids, self.visit_counts.tolist()))

    def values(self, problem: DecisionProblem) -> dict[str, float]:
        return dict(zip(problem.nonterminal_ids + problem.terminal_ids, self.state_values.tolist()))


def validate(problem: DecisionProblem) -> list[Diagnostic]:
    """Structural problems with ``problem``; empty when it is well formed."""
    out: list[Diagnostic] = []
    ids = [s.id for s in problem.states]
    known = set(ids)
    nonterminal = {s.id for s in problem.states if not s.terminal}
    for sid in {x for x in ids if ids.count(x) > 1}:
        out.append(Diagnostic("duplicate-state", sid, "state id used more than once"))
    if problem.num_actions < 1:
        out.append(Diagnostic("no-actions", "actions", "at least one action is required"))
    for F_index, F in enumerate(problem.dependence):
        if F.num_actions != problem.num_actions:
            out.append(Diagnostic("dependence-arity", f"dependant {F_index}", f"maps {F.num_actions} actions"))
    for s in problem.states:
        if s.terminal:
            if s.utility is None or not np.isfinite(s.utility):
                out.append(Diagnostic("missing-utility", s.id, "terminal state lacks a finite utility"))
        elif s.dependant is None or not 0 <= s.dependant < problem.num_dependants:
            out.append(Diagnostic("bad-dependant", s.id, f"dependant {s.dependant} not in 0..{problem.num_dependants - 1}"))
    total = 0.0
    for sid, prob in problem.initial.items():
        total += prob
        if sid not in known:
            out.append(Diagnostic("unknown-state", f"initial/{sid}", "initial mass on an unknown state"))
        elif sid not in nonterminal and prob != 0:
            out.append(Diagnostic("initial-terminal", f"initial/{sid}", "initial mass on a terminal state"))
        if prob < 0:
            out.append(Diagnostic("negative-prob", f"initial/{sid}", f"probability {prob}"))
    if abs(total - 1.0) > ROW_TOL:
        out.append(Diagnostic("initial-sum", "initial", f"initial distribution sums to {total:.12g}"))
    for s in problem.states:
        if s.terminal:
            continue
        for a, label in enumerate(problem.actions):
            loc = f"{s.id}/{label}"
            row = problem.transitions.get((s.id, a))
            if row is None:
                out.append(Diagnostic("missing-transition", loc, "no transition row"))
                continue
            for target, prob in row.items():
                if target not in known:
                    out.append(Diagnostic("unknown-state", loc, f"successor {target!r} is not a state"))
                if prob < 0:
                    out.append(Diagnostic("negative-prob", loc, f"probability {prob} to {target}"))
            row_sum = sum(row.values())
            if abs(row_sum - 1.0) > ROW_TOL:
                out.append(Diagnostic("row-sum", loc, f"row sums to {row_sum:.12g}"))
    for (sid, a) in problem.transitions:
        if sid not in nonterminal or not 0 <= a < problem.num_actions:
            out.append(Diagnostic("stray-transition", f"{sid}/{a}", "row for a terminal or unknown state/action"))
    return out


@dataclass(frozen=True)
class TerminationVerdict:
    terminates: bool
    witness_policy: tuple[int, ...] | None = None
    trapping_states: tuple[str, ...] | None = None

    def __bool__(self):
        return self.terminates


def check_termination(problem: DecisionProblem, cap: int = TERMINATION_CAP) -> TerminationVerdict:
    """Look for a pure joint policy with a closed class of non-terminal states.

    A closed class under a mixed joint policy stays closed under every pure
    selection from its support, so pure policies are exhaustive witnesses.
    """
    from scipy.sparse.csgraph import connected_components

    k, n = problem.num_actions, problem.num_dependants
    if k**n > cap:
        raise CapExceeded(f"|A|^n = {k}^{n} = {k**n} pure joint policies exceed the cap {cap}")
    arr = problem.arrays
    nt = problem.nonterminal_ids
    for sigma in itertools.product(range(k), repeat=n):
        chosen = np.array(sigma)[arr.owner]
        rows = np.arange(len(nt))
        inner = arr.to_nonterminal[rows, chosen] > 0
        leaks = arr.to_terminal[rows, chosen].sum(axis=1) > 0
        _, labels = connected_components(inner, directed=True, connection="strong")
        for c in np.unique(labels):
            members = labels == c
            exits = leaks[members].any() or inner[np.ix_(members, ~members)].any()
            if not exits:
                return TerminationVerdict(False, sigma, tuple(sid for sid, m in zip(nt, members) if m))
    return TerminationVerdict(True)


def _factor(matrix: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix, check_finite=True)
    if matrix.size and np.abs(np.diag(lu)).min() < PIVOT_TOL:
        raise TerminationError("I - Q is singular: the process can fail to terminate under this policy")
    return lu, piv


def solve_chain(problem: DecisionProblem, joint_policy) -> ChainSolution:
    """Visit counts, state values and expected utility for a joint policy.

    Parameters
    ----------
    joint_policy : array_like, shape (n, |A|)
        One policy per dependant.
    """
    arr = problem.arrays
    pis = np.array([as_policy(p, problem.num_actions) for p in np.atleast_2d(joint_policy)])
    if pis.shape[0] != problem.num_dependants:
        raise InvalidPolicy(f"joint policy has {pis.shape[0]} rows, expected {problem.num_dependants}")
    per_state = pis[arr.owner]
    q = np.einsum("sa,sat->st", per_state, arr.to_nonterminal)
    r = np.einsum("sa,sat->st", per_state, arr.to_terminal)
    fundamental = np.eye(len(q)) - q
    lu_piv = _factor(fundamental)
    visits = scipy.linalg.lu_solve(lu_piv, arr.start, trans=1)
    values = scipy.linalg.lu_solve(lu_piv, r @ arr.utilities)
    eu = float(arr.start @ (q @ values + r @ arr.utilities))
    return ChainSolution(
        visit_counts=np.maximum(visits, 0.0),
        state_values=np.concatenate([values, arr.utilities]),
        ex_ante_eu=eu,
        joint_policy=pis,
    )


def solve_at(problem: DecisionProblem, agent_policy) -> ChainSolution:
    """:func:`solve_chain` at the joint policy induced by ``agent_policy``."""
    return solve_chain(problem, problem.dependence_policies(agent_policy))


def ex_ante_eu(problem: DecisionProblem, agent_policy) -> float:
    return solve_at(problem, agent_policy).ex_ante_eu


def ex_ante_grad(problem: DecisionProblem, agent_policy, solution: ChainSolution | None = None) -> np.ndarray:
    r"""Directional derivatives of ex ante utility along ``e_a - pi0``.

    .. math::

        \partial_a E[u] = \sum_s E[\#s] \sum_{a'} \delta_{i(s)}(a'|a)
        \sum_{s'} T(s'|s,a') V(s')

    Raises :class:`NotDifferentiable` for step-like dependences.
    """
    p = as_policy(agent_policy, problem.num_actions)
    sol = solution or solve_at(problem, p)
    arr = problem.arrays
    deltas = np.array([F.deltas(p) for F in problem.dependence])  # (n, a, a')
    step = arr.one_step_values(sol.state_values)  # (s, a')
    per_state = deltas[arr.owner] @ step[:, :, None]  # (s, a, 1)
    return sol.visit_counts @ per_state[:, :, 0]


def finite_difference_grad(problem: DecisionProblem, agent_policy, step: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`ex_ante_eu` along ``e_a - pi0``.

    Falls back to a forward difference when the backward point would leave
    the simplex.
    """
    p = as_policy(agent_policy, problem.num_actions)
    out = np.zeros(problem.num_actions)
    base = None
    for a in range(problem.num_actions):
        d = -p.copy()
        d[a] += 1.0
        if not d.any():
            continue
        ahead = ex_ante_eu(problem, p + step * d)
        if p[a] >= step * (1.0 - p[a]):
            out[a] = (ahead - ex_ante_eu(problem, p - step * d)) / (2 * step)
        else:
            base = ex_ante_eu(problem, p) if base is None else base
            out[a] = (ahead - base) / step
    return out


def utility_range(problem: DecisionProblem) -> float:
    u = problem.arrays.utilities
    span = float(u.max() - u.min()) if u.size else 0.0
    return span if span > 0 else 1.0


def relabel(problem: DecisionProblem, mapping: Mapping[str, str], order: Sequence[int] | None = None) -> DecisionProblem:
    """Copy of ``problem`` with state ids renamed and optionally reordered."""
    states = [StateRecord(mapping[s.id], s.terminal, s.utility, s.dependant) for s in problem.states]
    if order is not None:
        states = [states[i] for i in order]
    return DecisionProblem(
        actions=problem.actions,
        states=tuple(states),
        initial={mapping[s]: p for s, p in problem.initial.items()},
        transitions={(mapping[s], a): {mapping[t]: q for t, q in row.items()} for (s, a), row in problem.transitions.items()},
        dependence=problem.dependence,
        name=problem.name,
    )
