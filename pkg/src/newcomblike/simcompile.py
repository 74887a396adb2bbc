"""Rewrite sampler dependences as explicit simulation trees.

Every non-terminal state ``s`` owned by a dependant with an ``N``-sample
rule ``g`` becomes a prefix tree: the agent is asked ``N`` times in a row
(each time as an exact copy), and after the last answer the original
transition ``T(.|s, g(answers))`` fires into the root of the next tree.
The result has identity dependence everywhere, so plain thirding applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anthropics import gsgt_beliefs, gt_beliefs, _check_sampler
from .core import DecisionProblem, StateRecord, solve_at
from .depfun import Identity, SimulationFunction
from .errors import CapExceeded, InputError
from .simplex import as_policy

STATE_CAP = 10**6


@dataclass(frozen=True)
class ExpandedProblem:
    problem: DecisionProblem
    back_map: dict[str, tuple[str, tuple[str, ...]]]
    trees: dict[str, tuple[str, ...]]  # original id -> expanded ids in the tree

    def back_map_section(self) -> dict:
        return {sid: {"state": s, "prefix": list(prefix)} for sid, (s, prefix) in self.back_map.items()}


def tree_state_id(state: str, prefix: Sequence[str]) -> str:
    return state if not prefix else f"{state}[{'.'.join(prefix)}]"


def expand_problem(problem: DecisionProblem, samplers: Sequence[SimulationFunction], check: bool = True,
                   cap: int = STATE_CAP) -> ExpandedProblem:
    """Replace dependant ``j``'s states by depth-``N_j`` trees of copies."""
    if len(samplers) != problem.num_dependants:
        raise InputError(f"need {problem.num_dependants} samplers, got {len(samplers)}")
    if check:
        for j, g in enumerate(samplers):
            _check_sampler(problem, j, g)
    k = problem.num_actions
    labels = problem.actions
    owner = {s.id: s.dependant for s in problem.states if not s.terminal}
    total = sum(sum(k**d for d in range(samplers[j].sample_count)) for j in owner.values())
    if total > cap:
        raise CapExceeded(f"expansion needs {total} states, above the cap {cap}")

    states: list[StateRecord] = []
    back: dict[str, tuple[str, tuple[str, ...]]] = {}
    trees: dict[str, tuple[str, ...]] = {}
    transitions: dict[tuple[str, int], dict[str, float]] = {}
    for s in problem.states:
        if s.terminal:
            continue
        g = samplers[s.dependant]
        members = []
        frontier: list[tuple[int, ...]] = [()]
        for depth in range(g.sample_count):
            next_frontier = []
            for prefix in frontier:
                sid = tree_state_id(s.id, [labels[a] for a in prefix])
                members.append(sid)
                states.append(StateRecord(sid, False, dependant=0))
                back[sid] = (s.id, tuple(labels[a] for a in prefix))
                for a in range(k):
                    longer = prefix + (a,)
                    if depth + 1 < g.sample_count:
                        transitions[(sid, a)] = {tree_state_id(s.id, [labels[b] for b in longer]): 1.0}
                        next_frontier.append(longer)
                    else:
                        mix = g.value(longer)
                        row: dict[str, float] = {}
                        for b in range(k):
                            if mix[b] == 0:
                                continue
                            for target, prob in problem.transitions[(s.id, b)].items():
                                row[target] = row.get(target, 0.0) + float(mix[b] * prob)
                        transitions[(sid, a)] = row
            frontier = next_frontier
        trees[s.id] = tuple(members)
    states += [s for s in problem.states if s.terminal]
    expanded = DecisionProblem(
        actions=problem.actions,
        states=tuple(states),
        initial=dict(problem.initial),
        transitions=transitions,
        dependence=(Identity(k),),
        name=f"{problem.name}-expanded" if problem.name else "expanded",
    )
    return ExpandedProblem(expanded, back, trees)


@dataclass
class ExpansionCheck:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error < self.tol)


@dataclass
class ExpansionReport:
    policy: np.ndarray
    checks: list[ExpansionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_report(self) -> dict:
        return {
            "policy": self.policy.tolist(),
            "passed": self.passed,
            "checks": [{"name": c.name, "error": c.error, "tol": c.tol, "passed": c.passed} for c in self.checks],
        }


def tree_credences(expanded: ExpandedProblem, policy) -> dict[str, float]:
    """Thirding credence of each tree, summed over its states."""
    beliefs = gt_beliefs(expanded.problem, policy)
    cred = dict(zip(expanded.problem.nonterminal_ids, beliefs.credences))
    return {s: float(sum(cred[t] for t in members)) for s, members in expanded.trees.items()}


def _tree_exit(expanded: ExpandedProblem, root: str, policy: np.ndarray) -> dict[str, float]:
    """Where mass started at ``root`` first lands outside its tree."""
    prob = expanded.problem
    inside = set(expanded.trees[expanded.back_map[root][0]])
    mass = {root: 1.0}
    out: dict[str, float] = {}
    while mass:
        nxt: dict[str, float] = {}
        for sid, m in mass.items():
            for a in range(prob.num_actions):
                for target, q in prob.transitions[(sid, a)].items():
                    w = m * policy[a] * q
                    if w == 0:
                        continue
                    # a leaf may point back at its own root: that is an exit too
                    if target in inside and target != root:
                        nxt[target] = nxt.get(target, 0.0) + w
                    else:
                        out[target] = out.get(target, 0.0) + w
        mass = nxt
    return out


def verify_expansion(original: DecisionProblem, expanded: ExpandedProblem, samplers: Sequence[SimulationFunction], policy) -> ExpansionReport:
    """Four equivalence checks between a problem and its expansion at ``policy``."""
    p = as_policy(policy, original.num_actions)
    report = ExpansionReport(p)

    orig_sol = solve_at(original, p)
    exp_sol = solve_at(expanded.problem, p)
    report.checks.append(ExpansionCheck("ex ante utility", abs(orig_sol.ex_ante_eu - exp_sol.ex_ante_eu), 1e-10))

    gsgt = gsgt_beliefs(original, samplers, p, check=False)
    trees = tree_credences(expanded, p)
    cred_err = max(abs(trees[s] - c) for s, c in zip(original.nonterminal_ids, gsgt.credences))
    report.checks.append(ExpansionCheck("tree credences", float(cred_err), 1e-10))

    # per-state causal values: original with sampler transforms, expansion with identity
    arr = original.arrays
    orig_step = arr.one_step_values(orig_sol.state_values)
    orig_cf = np.einsum("sab,sb->sa", gsgt.transforms[arr.owner], orig_step)
    exp_prob = expanded.problem
    exp_step = exp_prob.arrays.one_step_values(exp_sol.state_values)
    exp_index = {sid: i for i, sid in enumerate(exp_prob.nonterminal_ids)}
    gt = gt_beliefs(exp_prob, p).credences
    cf_err = 0.0
    for i, s in enumerate(original.nonterminal_ids):
        idx = [exp_index[t] for t in expanded.trees[s]]
        weight = gt[idx].sum()
        if weight <= 0:
            continue
        averaged = gt[idx] @ exp_step[idx] / weight
        cf_err = max(cf_err, float(np.abs(averaged - orig_cf[i]).max()))
    report.checks.append(ExpansionCheck("counterfactuals", cf_err, 1e-9))

    joint = original.dependence_policies(p)
    dyn_err = 0.0
    for s in original.nonterminal_ids:
        exits = _tree_exit(expanded, s, p)
        mix = joint[original.arrays.owner[original.nonterminal_ids.index(s)]]
        want: dict[str, float] = {}
        for b in range(original.num_actions):
            for target, q in original.transitions[(s, b)].items():
                want[target] = want.get(target, 0.0) + mix[b] * q
        for target in set(want) | set(exits):
            dyn_err = max(dyn_err, abs(want.get(target, 0.0) - exits.get(target, 0.0)))
    report.checks.append(ExpansionCheck("tree-to-tree dynamics", dyn_err, 1e-10))
    return report


def ratifiability_agrees(original: DecisionProblem, expanded: ExpandedProblem, samplers, policy) -> tuple[bool, bool]:
    """(GSGT verdict on the original, thirding verdict on the expansion)."""
    from .cdt import is_ratifiable

    p = as_policy(policy, original.num_actions)
    a = is_ratifiable(original, gsgt_beliefs(original, samplers, p, check=False), p).ratifiable
    b = is_ratifiable(expanded.problem, gt_beliefs(expanded.problem, p), p).ratifiable
    return a, b
