"""Self-locating belief systems over the non-terminal states of a problem.

A belief system pairs a credence vector with one transformation table per
dependant: row ``a`` of ``transforms[j]`` is the policy dependant ``j``
would follow if the agent, at this state, switched to action ``a``.

Four constructions are provided: plain thirding for exact-copy problems,
thirding over an explicit sampling model, the two constructive local
sampling cases, and the derivative-weighted generalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DecisionProblem, solve_at
from .depfun import Sampler, SimulationFunction, GRID_RESOLUTION
from .errors import BeliefsUnavailable, InputError, SamplerMismatch
from .simplex import as_policy, simplex_grid, vertex_index

ZERO_COMPONENT = 1e-12
REACHABLE = 1e-15
SAMPLER_MATCH_TOL = 1e-8


@dataclass(frozen=True)
class BeliefSystem:
    kind: str
    credences: np.ndarray
    transforms: np.ndarray  # (n, |A|, |A|)
    anchor: np.ndarray
    weights: np.ndarray | None = None
    degenerate_uniform: bool = False
    samplers: tuple | None = None

    def to_report(self, problem: DecisionProblem) -> dict:
        report = {
            "kind": self.kind,
            "policy": self.anchor.tolist(),
            "degenerate_uniform": self.degenerate_uniform,
            "credences": dict(zip(problem.nonterminal_ids, self.credences.tolist())),
            "transforms": [
                {label: row.tolist() for label, row in zip(problem.actions, table)} for table in self.transforms
            ],
        }
        if self.weights is not None:
            report["weights"] = self.weights.tolist()
        if self.samplers is not None:
            report["sample_counts"] = [s.sample_count for s in self.samplers]
        return report


@dataclass(frozen=True)
class GGTComponents:
    gamma: np.ndarray  # (n,)
    rho: np.ndarray  # (n,)
    tau: np.ndarray  # (n, |A|, |A|)
    deltas: np.ndarray  # (n, |A|, |A|)
    dependence_policies: np.ndarray  # (n, |A|)
    anchor: np.ndarray
    proper: bool = True

    def to_report(self, problem: DecisionProblem) -> dict:
        return {
            "policy": self.anchor.tolist(),
            "gamma": self.gamma.tolist(),
            "rho": self.rho.tolist(),
            "transforms_in_simplex": self.proper,
            "tau": [{label: row.tolist() for label, row in zip(problem.actions, t)} for t in self.tau],
        }


def _normalized(weights: np.ndarray) -> np.ndarray:
    return weights / weights.sum()


def gt_beliefs(problem: DecisionProblem, policy) -> BeliefSystem:
    """Credence proportional to expected visits; identity transforms."""
    p = as_policy(policy, problem.num_actions)
    if not problem.is_all_identity():
        raise InputError("thirding without weights needs every dependence to be the identity")
    visits = solve_at(problem, p).visit_counts
    k = problem.num_actions
    transforms = np.repeat(np.eye(k)[None], problem.num_dependants, axis=0)
    return BeliefSystem("GT", _normalized(visits), transforms, p)


def _check_sampler(problem: DecisionProblem, j: int, sampler: SimulationFunction) -> None:
    F = problem.dependence[j]
    for x in simplex_grid(problem.num_actions, GRID_RESOLUTION):
        if np.abs(sampler(x) - F(x)).max() > SAMPLER_MATCH_TOL:
            raise SamplerMismatch(f"sampler for dependant {j} differs from its dependence at {x.tolist()}")


def gsgt_beliefs(problem: DecisionProblem, samplers: Sequence[SimulationFunction], policy, check: bool = True) -> BeliefSystem:
    """Thirding over an explicit model where dependant ``j`` runs ``N_j`` samples."""
    p = as_policy(policy, problem.num_actions)
    if len(samplers) != problem.num_dependants:
        raise InputError(f"need {problem.num_dependants} samplers, got {len(samplers)}")
    if check:
        for j, g in enumerate(samplers):
            _check_sampler(problem, j, g)
    sol = solve_at(problem, p)
    counts = np.array([g.sample_count for g in samplers], dtype=float)
    owner = problem.arrays.owner
    credences = _normalized(counts[owner] * sol.visit_counts)
    transforms = np.array([[g.slot_mean(a, p) for a in range(problem.num_actions)] for g in samplers])
    return BeliefSystem("GSGT", credences, transforms, p, weights=counts, samplers=tuple(samplers))


def ggt_components(
    problem: DecisionProblem,
    policy,
    rho_override: Sequence[float | None] | None = None,
    strict: bool = True,
) -> GGTComponents:
    """Minimal weights, chosen weights and transforms for every dependant.

    ``rho_override`` may hold ``None`` entries to keep the minimal weight for
    that dependant.  A weight below the minimum is an error unless
    ``strict=False``, in which case the transforms ``F + delta / rho`` are
    kept as computed (they leave the simplex) and ``proper`` is False.
    Causal advantages only depend on differences of transforms, so they stay
    meaningful.  Raises :class:`NotDifferentiable` for step-like maps.
    """
    p = as_policy(policy, problem.num_actions)
    n = problem.num_dependants
    if rho_override is not None and len(rho_override) != n:
        raise InputError(f"need {n} weights, got {len(rho_override)}")
    values = problem.dependence_policies(p)
    deltas = np.array([F.deltas(p) for F in problem.dependence])
    gamma = np.zeros(n)
    for j in range(n):
        live = values[j] >= ZERO_COMPONENT
        if live.any():
            ratios = -deltas[j][:, live] / values[j][live]
            gamma[j] = max(0.0, float(ratios.max()))
    rho = gamma.copy()
    if rho_override is not None:
        for j, r in enumerate(rho_override):
            if r is None:
                continue
            if r < 0 or (strict and r < gamma[j] * (1 - 1e-9) - 1e-12):
                raise InputError(f"weight {r} for dependant {j} is below its minimum {gamma[j]:.12g}")
            rho[j] = float(r)
    tau = np.empty_like(deltas)
    for j in range(n):
        if rho[j] > 0:
            tau[j] = values[j][None, :] + deltas[j] / rho[j]
        else:
            tau[j] = np.repeat(values[j][None, :], problem.num_actions, axis=0)
    proper = bool(tau.min() >= -1e-12) if tau.size else True
    if proper:
        # rounding at the minimal weight can leave -1e-17 entries
        tau = np.clip(tau, 0.0, None)
        tau /= tau.sum(axis=2, keepdims=True)
    return GGTComponents(gamma, rho, tau, deltas, values, p, proper)


def ggt_beliefs(problem: DecisionProblem, policy, components: GGTComponents | None = None) -> BeliefSystem:
    """Credence proportional to ``rho_{i(s)} * E[#s]``."""
    p = as_policy(policy, problem.num_actions)
    comps = components if components is not None else ggt_components(problem, p)
    visits = solve_at(problem, p).visit_counts
    weighted = comps.rho[problem.arrays.owner] * visits
    total = weighted.sum()
    if total > 0:
        return BeliefSystem("GGT", weighted / total, comps.tau, p, weights=comps.rho)
    reachable = (visits > REACHABLE).astype(float)
    return BeliefSystem("GGT", _normalized(reachable), comps.tau, p, weights=comps.rho, degenerate_uniform=True)


def lsgt_from_simple_cases(problem: DecisionProblem, policy) -> BeliefSystem:
    """Local sampling model built from the two easy constructions.

    For a dependant with minimal weight at most one, a single sample with
    ``g(a) = F(pi0) + delta(a)`` works.  At a pure policy ``pi0 = e_b``,
    ``ceil(rho)`` samples with ``g`` equal to ``F(pi0)`` except on tuples that
    deviate from ``b`` in exactly one slot, which get ``F(pi0) + delta(a)/N``.
    """
    p = as_policy(policy, problem.num_actions)
    comps = ggt_components(problem, p)
    k = problem.num_actions
    pure = vertex_index(p)
    samplers = []
    for j in range(problem.num_dependants):
        base, delta = comps.dependence_policies[j], comps.deltas[j]
        if comps.gamma[j] <= 1.0:
            samplers.append(SimulationFunction(k, 1, counts={
                tuple(np.eye(k, dtype=int)[a]): np.clip(base + delta[a], 0.0, None) for a in range(k)
            }))
        elif pure is not None:
            n = math.ceil(comps.gamma[j] - 1e-12)

            def rule(counts, base=base, delta=delta, n=n):
                counts = np.array(counts)
                if counts[pure] == n - 1:
                    other = int(np.argmax(np.where(np.arange(k) == pure, -1, counts)))
                    return np.clip(base + delta[other] / n, 0.0, None)
                return base

            samplers.append(SimulationFunction.from_function(k, n, rule))
        else:
            raise BeliefsUnavailable(
                f"dependant {j} has minimal weight {comps.gamma[j]:.6g} > 1 at a mixed policy; no simple local model"
            )
    counts = np.array([g.sample_count for g in samplers], dtype=float)
    visits = solve_at(problem, p).visit_counts
    weighted = counts[problem.arrays.owner] * visits
    transforms = np.array([[g.slot_mean(a, p) for a in range(k)] for g in samplers])
    return BeliefSystem("LSGT", _normalized(weighted), transforms, p, weights=counts, samplers=tuple(samplers))


@dataclass(frozen=True)
class AuditReport:
    faithful: bool
    fanciful: bool
    details: list[str] = field(default_factory=list)


def audit_beliefs(problem: DecisionProblem, policy, beliefs: BeliefSystem) -> AuditReport:
    """Check respect for exact copies and for ex ante impossibility."""
    p = as_policy(policy, problem.num_actions)
    visits = solve_at(problem, p).visit_counts
    owner = problem.arrays.owner
    details = []
    faithful = True
    for j, F in enumerate(problem.dependence):
        if not F.is_identity():
            continue
        mine = owner == j
        if visits[mine].sum() <= REACHABLE:
            continue
        if beliefs.credences[mine].sum() <= 0:
            faithful = False
            details.append(f"no credence on reachable copy dependant {j}")
        tau = beliefs.transforms[j]
        for a in range(problem.num_actions):
            for b in range(problem.num_actions):
                if a != b and not tau[a, a] > tau[b, a]:
                    faithful = False
                    details.append(f"dependant {j}: switching to {problem.actions[a]} does not raise its probability")
    unreachable = (visits <= REACHABLE) & (beliefs.credences > 0)
    for sid in np.array(problem.nonterminal_ids)[unreachable]:
        details.append(f"credence on ex ante impossible state {sid}")
    return AuditReport(faithful, bool(unreachable.any()), details)


def sampler_for(problem: DecisionProblem, j: int) -> SimulationFunction | None:
    """The dependence's own sampler when it is stored as one."""
    F = problem.dependence[j]
    return F.sampler if isinstance(F, Sampler) else None
