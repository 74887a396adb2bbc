"""Sample histories of a decision problem and test chain quantities against them.

Randomness comes from a counter-based generator: step ``t`` of a batch uses
``Philox(key=seed, counter=t)`` and rollout ``i`` reads row ``i`` of that
step's draws.  A rollout's history therefore depends only on ``(seed, i)``,
not on how many other rollouts run next to it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ChainSolution, DecisionProblem, solve_chain
from .errors import InvalidPolicy, StepCapExceeded
from .simplex import as_policy

STEP_CAP = 10**7
DEFAULT_Z = 4.0


@dataclass(frozen=True)
class HistorySample:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    utility: float

    @property
    def length(self) -> int:
        return len(self.states)

    def to_line(self, seed: int, index: int) -> str:
        return json.dumps({"seed": seed, "index": index, "states": list(self.states),
                           "actions": list(self.actions), "utility": self.utility})


def _step_draws(seed: int, step: int, rows: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, step]))
    return gen.random((rows, 2))


def _sample(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF sampling; ``cdf`` rows end at (about) 1."""
    idx = (u[:, None] >= cdf).sum(axis=1)
    # a row summing to 1 - 1e-16 must not run past its last entry
    return np.minimum(idx, cdf.shape[1] - 1)


@dataclass
class Batch:
    """Per-rollout utilities, non-terminal visit counts and lengths."""

    utilities: np.ndarray
    visits: np.ndarray  # (rollouts, n_nt)
    lengths: np.ndarray
    histories: list[HistorySample] | None = None


def simulate(problem: DecisionProblem, joint_policy, rollouts: int, seed: int = 0, record: bool = False,
             step_cap: int = STEP_CAP) -> Batch:
    """Run ``rollouts`` histories in lockstep under a per-dependant joint policy."""
    arr = problem.arrays
    pis = np.array([as_policy(p, problem.num_actions) for p in np.atleast_2d(joint_policy)])
    if pis.shape[0] != problem.num_dependants:
        raise InvalidPolicy(f"joint policy has {pis.shape[0]} rows, expected {problem.num_dependants}")
    n_nt = len(problem.nonterminal_ids)
    action_cdf = np.cumsum(pis[arr.owner], axis=1)  # (n_nt, k)
    full = np.concatenate([arr.to_nonterminal, arr.to_terminal], axis=2)
    step_cdf = np.cumsum(full, axis=2)  # (n_nt, k, n_all)
    start_cdf = np.cumsum(arr.start)

    state = _sample(np.broadcast_to(start_cdf, (rollouts, n_nt)), _step_draws(seed, 0, rollouts)[:, 0])
    visits = np.zeros((rollouts, n_nt), dtype=np.int64)
    lengths = np.ones(rollouts, dtype=np.int64)
    final = np.full(rollouts, -1, dtype=np.int64)
    active = np.arange(rollouts)
    trace_states, trace_actions = [], []
    step = 0
    while active.size:
        step += 1
        if step > step_cap:
            raise StepCapExceeded(f"a history exceeded {step_cap} steps; the problem may not terminate")
        here = state[active]
        visits[active, here] += 1
        u = _step_draws(seed, step, rollouts)[active]
        action = _sample(action_cdf[here], u[:, 0])
        nxt = _sample(step_cdf[here, action], u[:, 1])
        if record:
            trace_states.append((active.copy(), here.copy(), nxt.copy()))
            trace_actions.append(action.copy())
        lengths[active] += 1
        done = nxt >= n_nt
        final[active[done]] = nxt[done] - n_nt
        state[active] = np.where(done, 0, nxt)
        active = active[~done]
    utilities = arr.utilities[final]
    histories = _assemble(problem, rollouts, trace_states, trace_actions) if record else None
    return Batch(utilities, visits, lengths, histories)


def _assemble(problem, rollouts, trace_states, trace_actions) -> list[HistorySample]:
    names = problem.nonterminal_ids + problem.terminal_ids
    utilities = dict(zip(problem.terminal_ids, problem.arrays.utilities.tolist()))
    states: list[list[str]] = [[] for _ in range(rollouts)]
    actions: list[list[str]] = [[] for _ in range(rollouts)]
    ends: list[str] = [""] * rollouts
    for (who, here, nxt), acts in zip(trace_states, trace_actions):
        for i, s, t, a in zip(who.tolist(), here.tolist(), nxt.tolist(), acts.tolist()):
            states[i].append(names[s])
            actions[i].append(problem.actions[a])
            ends[i] = names[t]
    return [HistorySample(tuple(s + [e]), tuple(a), utilities[e]) for s, a, e in zip(states, actions, ends)]


def rollout(problem: DecisionProblem, joint_policy, seed: int = 0, index: int = 0) -> HistorySample:
    """History number ``index`` of the batch generated from ``seed``."""
    batch = simulate(problem, joint_policy, index + 1, seed, record=True)
    return batch.histories[index]


def dump_histories(batch: Batch, seed: int) -> str:
    return "".join(h.to_line(seed, i) + "\n" for i, h in enumerate(batch.histories or []))


@dataclass(frozen=True)
class QuantityCheck:
    quantity: str
    expected: float
    mean: float
    stderr: float
    z: float
    passed: bool


@dataclass
class ValidationReport:
    policy: np.ndarray
    rollouts: int
    seed: int
    z_limit: float
    checks: list[QuantityCheck] = field(default_factory=list)
    mean_length: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_report(self) -> dict:
        return {
            "policy": self.policy.tolist(),
            "rollouts": self.rollouts,
            "seed": self.seed,
            "z_limit": self.z_limit,
            "mean_length": self.mean_length,
            "passed": self.passed,
            "checks": [c.__dict__ for c in self.checks],
        }


def _z_check(name: str, samples: np.ndarray, expected: float, z_limit: float) -> QuantityCheck:
    n = samples.size
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if stderr == 0.0:
        # every draw identical: compare exactly (up to rounding in the analytic value)
        gap = abs(mean - expected)
        z = 0.0 if gap <= 1e-9 * max(1.0, abs(expected)) else math.inf
    else:
        z = (mean - expected) / stderr
    return QuantityCheck(name, float(expected), mean, stderr, float(z), bool(abs(z) <= z_limit))


def validate(problem: DecisionProblem, policy, rollouts: int = 100_000, seed: int = 0, z: float = DEFAULT_Z,
             expected: ChainSolution | None = None) -> ValidationReport:
    """z-tests of empirical utility and per-state visit counts against the chain solution."""
    p = as_policy(policy, problem.num_actions)
    joint = problem.dependence_policies(p)
    sol = expected if expected is not None else solve_chain(problem, joint)
    batch = simulate(problem, joint, rollouts, seed)
    report = ValidationReport(p, rollouts, seed, z, mean_length=float(np.mean(batch.lengths)))
    report.checks.append(_z_check("ex_ante_eu", batch.utilities, sol.ex_ante_eu, z))
    for i, sid in enumerate(problem.nonterminal_ids):
        report.checks.append(_z_check(f"visits[{sid}]", batch.visits[:, i], float(sol.visit_counts[i]), z))
    return report


@dataclass(frozen=True)
class TwoSampleResult:
    mean_a: float
    mean_b: float
    z: float
    passed: bool


def compare_utilities(a: Sequence[float], b: Sequence[float], z: float = DEFAULT_Z) -> TwoSampleResult:
    """Two-sample z-test that two batches share a mean utility."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    ma, mb = float(np.mean(a)), float(np.mean(b))
    se = math.sqrt(np.var(a, ddof=1) / a.size + np.var(b, ddof=1) / b.size)
    score = 0.0 if se == 0 and ma == mb else (ma - mb) / se if se > 0 else math.inf
    return TwoSampleResult(ma, mb, float(score), bool(abs(score) <= z))


def compare_problems(first: DecisionProblem, second: DecisionProblem, policy, rollouts: int = 100_000,
                     seed: int = 0, z: float = DEFAULT_Z) -> TwoSampleResult:
    """Empirical utilities of two problems at the same agent policy, independent seeds."""
    p = as_policy(policy, first.num_actions)
    a = simulate(first, first.dependence_policies(p), rollouts, seed).utilities
    b = simulate(second, second.dependence_policies(p), rollouts, seed + 1).utilities
    return compare_utilities(a, b, z)


__all__ = [
    "HistorySample", "Batch", "simulate", "rollout", "dump_histories", "QuantityCheck", "ValidationReport",
    "validate", "TwoSampleResult", "compare_utilities", "compare_problems", "STEP_CAP",
]
