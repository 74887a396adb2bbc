"""Causal expected utility under self-locating beliefs, and policy search.

The central fact used throughout: with derivative-weighted thirding, the
causal advantage of each action is the ex ante directional derivative
divided by a positive constant.  So the ratifiable policies are exactly the
points where no directional derivative is positive, and they can be found by
root finding on the gradient instead of best-response iteration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from . import anthropics
from .anthropics import BeliefSystem, audit_beliefs, ggt_beliefs, ggt_components
from .core import DecisionProblem, ex_ante_eu, ex_ante_grad, solve_at, utility_range
from .depfun import bernstein_approx, is_sampleable, sup_error
from .errors import AnalysisRefusal, AnchorMismatch, NotDifferentiable
from .simplex import as_policy, project_to_simplex, simplex_grid, vertex

RATIFY_TOL = 1e-7
ANCHOR_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the stationary-set and ex ante searches.

    ``grid`` is the lattice resolution (``1/grid`` spacing) for two actions;
    with more actions ``face_grid`` is used per face.  ``tol`` is the root
    tolerance and ``condition_tol`` the band for ``grad <= 0`` on the
    utility scale rescaled to [0, 1].
    """

    grid: int = 2000
    face_grid: int = 40
    restarts: int = 8
    tol: float = 1e-10
    condition_tol: float = 1e-7
    dedup_radius: float = 1e-6
    value_tol: float = 1e-10
    seed: int = 0


# ---------------------------------------------------------------------------
# causal expected utility


def _check_anchor(beliefs: BeliefSystem, p: np.ndarray) -> None:
    if np.abs(beliefs.anchor - p).max() > ANCHOR_TOL:
        raise AnchorMismatch(f"beliefs anchored at {beliefs.anchor.tolist()}, queried at {p.tolist()}")


def cdt_eus(problem: DecisionProblem, beliefs: BeliefSystem, policy=None) -> np.ndarray:
    """Causal expected utility of each action at the beliefs' anchor."""
    p = beliefs.anchor if policy is None else as_policy(policy, problem.num_actions)
    _check_anchor(beliefs, p)
    arr = problem.arrays
    step = arr.one_step_values(solve_at(problem, p).state_values)  # (s, a')
    tau = beliefs.transforms[arr.owner]  # (s, a, a')
    per_state = np.einsum("sab,sb->sa", tau, step)
    return beliefs.credences @ per_state


def cdt_eu(problem: DecisionProblem, beliefs: BeliefSystem, policy, action) -> float:
    """Causal expected utility of an action, or of a mixture given as a vector."""
    eus = cdt_eus(problem, beliefs, policy)
    if np.ndim(action) == 1:
        return float(as_policy(action, problem.num_actions) @ eus)
    return float(eus[problem.action_index(action)])


@dataclass(frozen=True)
class RatifiabilityReport:
    policy: np.ndarray
    eus: np.ndarray
    advantages: np.ndarray
    ratifiable: bool
    tol: float
    kind: str

    def __bool__(self):
        return self.ratifiable

    def to_report(self, problem: DecisionProblem) -> dict:
        return {
            "policy": self.policy.tolist(),
            "belief_kind": self.kind,
            "cdt_eu": dict(zip(problem.actions, self.eus.tolist())),
            "advantage": dict(zip(problem.actions, self.advantages.tolist())),
            "ratifiable": self.ratifiable,
            "tolerance": self.tol,
        }


def is_ratifiable(problem: DecisionProblem, beliefs: BeliefSystem, policy=None, tol: float = RATIFY_TOL) -> RatifiabilityReport:
    """Whether every action in the support is a causal best response."""
    p = beliefs.anchor if policy is None else as_policy(policy, problem.num_actions)
    eus = cdt_eus(problem, beliefs, p)
    adv = eus - eus.max()
    scale = utility_range(problem)
    support = p > 0
    ok = bool(np.all(adv[support] / scale >= -tol))
    return RatifiabilityReport(p, eus, adv, ok, tol, beliefs.kind)


def grad_identity_residual(problem: DecisionProblem, policy, rho_override=None, strict: bool = True) -> float:
    """Gap between the ex ante gradient and the scaled GGT causal advantage."""
    p = as_policy(policy, problem.num_actions)
    comps = ggt_components(problem, p, rho_override, strict)
    sol = solve_at(problem, p)
    grad = ex_ante_grad(problem, p, sol)
    beliefs = ggt_beliefs(problem, p, comps)
    eus = cdt_eus(problem, beliefs, p)
    total_weight = float(comps.rho[problem.arrays.owner] @ sol.visit_counts)
    return float(np.abs(grad - total_weight * (eus - p @ eus)).max())


def satisfies_gradient_condition(problem: DecisionProblem, policy, tol: float = RATIFY_TOL, grad=None) -> bool:
    """All directional derivatives at most ``tol`` (rescaled utility)."""
    g = ex_ante_grad(problem, policy) if grad is None else grad
    return bool(np.all(g / utility_range(problem) <= tol))


# ---------------------------------------------------------------------------
# policy sets


@dataclass
class PolicyEntry:
    policy: np.ndarray
    classification: str
    ex_ante_eu: float
    grad: np.ndarray | None = None
    ggt_ratifiable: bool | None = None

    def to_report(self, problem: DecisionProblem) -> dict:
        out = {
            "policy": self.policy.tolist(),
            "classification": self.classification,
            "ex_ante_eu": self.ex_ante_eu,
        }
        if self.grad is not None:
            out["grad"] = dict(zip(problem.actions, self.grad.tolist()))
        if self.ggt_ratifiable is not None:
            out["ggt_ratifiable"] = self.ggt_ratifiable
        return out


@dataclass
class PolicySet:
    entries: list[PolicyEntry]
    dedup_radius: float
    max_value: float | None = None
    everywhere_stationary: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def policies(self) -> list[np.ndarray]:
        return [e.policy for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_report(self, problem: DecisionProblem) -> dict:
        out = {
            "dedup_radius": self.dedup_radius,
            "everywhere_stationary": self.everywhere_stationary,
            "policies": [e.to_report(problem) for e in self.entries],
        }
        if self.max_value is not None:
            out["max_value"] = self.max_value
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _dedup(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for x in points:
        if all(np.linalg.norm(x - y) > radius for y in kept):
            kept.append(x)
    return sorted(kept, key=lambda x: tuple((-x).tolist()))


def set_distance(points: Sequence[np.ndarray], targets: Sequence[np.ndarray]) -> float:
    """Largest distance from a point of ``points`` to the nearest target."""
    if not len(points) or not len(targets):
        return float("inf")
    return max(min(float(np.linalg.norm(x - y)) for y in targets) for x in points)


def _edge_policy(p: float) -> np.ndarray:
    return np.array([p, 1.0 - p])


def _edge_slope(problem: DecisionProblem, p: float) -> float:
    """``grad(a_1) - grad(a_2)`` at ``(p, 1-p)``: d EU / d p along the edge."""
    g = ex_ante_grad(problem, _edge_policy(p))
    return float(g[0] - g[1])


def _two_action_candidates(problem: DecisionProblem, config: SolverConfig) -> tuple[list[np.ndarray], bool]:
    scale = utility_range(problem)
    ps = np.linspace(0.0, 1.0, config.grid + 1)
    slope = np.array([_edge_slope(problem, p) for p in ps])
    if np.abs(slope).max() / scale <= config.condition_tol:
        return [vertex(2, 0), vertex(2, 1)], True
    found = []
    for i in range(1, len(ps) - 1):
        if slope[i] == 0.0:
            found.append(ps[i])
    for i in range(len(ps) - 1):
        lo, hi = slope[i], slope[i + 1]
        if lo * hi < 0:
            found.append(brentq(lambda p: _edge_slope(problem, p), ps[i], ps[i + 1], xtol=config.tol * 1e-2, rtol=4 * np.finfo(float).eps))
    # touching roots with no sign change: keep grid minima of |slope| inside the band
    mag = np.abs(slope)
    for i in range(1, len(ps) - 1):
        if mag[i] / scale <= config.condition_tol and mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
            found.append(ps[i])
    points = [_edge_policy(p) for p in found if 0.0 < p < 1.0]
    points += [vertex(2, 0), vertex(2, 1)]
    return points, False


def _face_residual(problem: DecisionProblem, face: tuple[int, ...], x: np.ndarray):
    k = problem.num_actions
    pi = np.zeros(k)
    pi[list(face[:-1])] = x
    pi[face[-1]] = 1.0 - x.sum()
    g = ex_ante_grad(problem, pi)
    return g[list(face[:-1])] - g[face[-1]], pi, g


def _newton_on_face(problem: DecisionProblem, face: tuple[int, ...], x0: np.ndarray, max_iter: int = 80):
    """Solve ``grad`` equal across the face by damped Newton.

    Returns the policy or None when it wanders to the face boundary or fails
    to settle.
    """
    x = x0.copy()
    m = len(x)
    for _ in range(max_iter):
        r, pi, _ = _face_residual(problem, face, x)
        jac = np.empty((m, m))
        room = min(x.min(), 1.0 - x.sum())
        h = min(1e-6, room / 4)
        if h <= 1e-14:
            return None
        for i in range(m):
            e = np.zeros(m)
            e[i] = h
            jac[:, i] = (_face_residual(problem, face, x + e)[0] - _face_residual(problem, face, x - e)[0]) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        # keep strictly inside the face
        coords = np.append(x, 1.0 - x.sum())
        dcoords = np.append(step, -step.sum())
        shrink = 1.0
        neg = dcoords < 0
        if neg.any():
            shrink = min(1.0, 0.9 * float(np.min(coords[neg] / -dcoords[neg])))
        x = x + shrink * step
        if np.abs(shrink * step).max() < 1e-14:
            break
    coords = np.append(x, 1.0 - x.sum())
    if coords.min() <= 1e-10:
        return None
    return _face_residual(problem, face, x)[1]


def _multi_action_candidates(problem: DecisionProblem, config: SolverConfig) -> list[np.ndarray]:
    k = problem.num_actions
    rng = np.random.default_rng(config.seed)
    points = [vertex(k, a) for a in range(k)]
    for size in range(2, k + 1):
        for face in itertools.combinations(range(k), size):
            starts = [np.full(size, 1.0 / size)]
            lattice = simplex_grid(size, config.face_grid)
            lattice = lattice[(lattice > 0).all(axis=1)]
            if len(lattice):
                values = []
                for c in lattice:
                    pi = np.zeros(k)
                    pi[list(face)] = c
                    values.append(ex_ante_eu(problem, pi))
                order = np.argsort(values)
                picks = list(order[-config.restarts :]) + list(order[: config.restarts // 2])
                starts += [lattice[i] for i in picks]
            starts += list(rng.dirichlet(np.ones(size), size=config.restarts))
            for s in starts:
                pi = _newton_on_face(problem, face, np.asarray(s[:-1], dtype=float))
                if pi is not None:
                    points.append(pi)
    return points


def find_stationary(problem: DecisionProblem, config: SolverConfig | None = None, rho_override=None) -> PolicySet:
    """Policies where no directional derivative of ex ante utility is positive.

    By the gradient identity these are exactly the CDT+GGT ratifiable
    policies; each one is also checked directly against GGT beliefs built
    with ``rho_override``.  With more than two actions the search is a
    multi-start Newton solve on every face and is not certified complete.
    """
    config = config or SolverConfig()
    if not problem.is_differentiable():
        raise NotDifferentiable()
    scale = utility_range(problem)
    everywhere = False
    if problem.num_actions == 1:
        raw = [np.ones(1)]
    elif problem.num_actions == 2:
        raw, everywhere = _two_action_candidates(problem, config)
    else:
        raw = _multi_action_candidates(problem, config)
    kept = []
    for pi in raw:
        g = ex_ante_grad(problem, pi)
        if np.all(g / scale <= config.condition_tol):
            kept.append(pi)
    kept = _dedup(kept, config.dedup_radius)
    entries = []
    for pi in kept:
        g = ex_ante_grad(problem, pi)
        beliefs = ggt_beliefs(problem, pi, ggt_components(problem, pi, rho_override))
        ratifiable = is_ratifiable(problem, beliefs, pi).ratifiable
        entries.append(PolicyEntry(pi, "stationary-other", ex_ante_eu(problem, pi), g, ratifiable))
    result = PolicySet(entries, config.dedup_radius, everywhere_stationary=everywhere)
    if entries:
        best = max(e.ex_ante_eu for e in entries)
        grid_best = _grid_best_value(problem, config)
        best = max(best, grid_best)
        result.max_value = best
        for e in entries:
            if e.ex_ante_eu >= best - config.value_tol * scale - 1e-9 * scale:
                e.classification = "ex-ante-max"
    else:
        result.notes.append("no stationary policy found; an ex ante optimum should always be one")
    if problem.num_actions > 2:
        result.notes.append("multi-start search over faces; completeness not certified")
    return result


def _grid_best_value(problem: DecisionProblem, config: SolverConfig) -> float:
    res = config.grid if problem.num_actions <= 2 else config.face_grid
    return max(ex_ante_eu(problem, x) for x in simplex_grid(problem.num_actions, res))


def optimize_ex_ante(problem: DecisionProblem, config: SolverConfig | None = None) -> PolicySet:
    """Global maximizers of ex ante expected utility (the argmax set)."""
    config = config or SolverConfig()
    scale = utility_range(problem)
    k = problem.num_actions
    res = config.grid if k <= 2 else config.face_grid
    lattice = simplex_grid(k, res)
    values = np.array([ex_ante_eu(problem, x) for x in lattice])
    candidates: list[np.ndarray] = []
    if problem.is_differentiable():
        candidates += [e.policy for e in find_stationary(problem, config)]
    elif k == 2:
        # lattice runs from p = 1 down to p = 0
        for i in range(len(values)):
            left = values[i - 1] if i > 0 else -np.inf
            right = values[i + 1] if i + 1 < len(values) else -np.inf
            if values[i] >= left and values[i] >= right:
                candidates.append(lattice[i])
                if 0 < i < len(values) - 1:
                    lo, hi = sorted((lattice[i + 1][0], lattice[i - 1][0]))
                    r = minimize_scalar(lambda p: -ex_ante_eu(problem, _edge_policy(p)), bounds=(lo, hi),
                                        method="bounded", options={"xatol": 1e-12})
                    candidates.append(_edge_policy(r.x))
    else:
        top = np.argsort(values)[-config.restarts :]
        for i in top:
            candidates.append(lattice[i])
            r = minimize(lambda x: -ex_ante_eu(problem, project_to_simplex(x)), lattice[i], method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
            candidates.append(project_to_simplex(r.x))
    candidates += list(lattice[values >= values.max() - config.value_tol * scale])
    scored = [(ex_ante_eu(problem, x), x) for x in candidates]
    best = max(v for v, _ in scored)
    winners = _dedup([x for v, x in scored if v >= best - config.value_tol * scale], config.dedup_radius)
    if problem.is_differentiable():
        # a lattice point can tie within tolerance while not being stationary; keep true optima
        stationary = [x for x in winners if satisfies_gradient_condition(problem, x, config.condition_tol)]
        winners = stationary or winners
    entries = [PolicyEntry(x, "ex-ante-max", ex_ante_eu(problem, x)) for x in winners]
    return PolicySet(entries, config.dedup_radius, max_value=best)


# ---------------------------------------------------------------------------
# approximation sequences


@dataclass
class ConvergenceStep:
    sample_count: int
    problem: DecisionProblem
    approximated: list[int]
    sup_error: float
    stationary: PolicySet
    optima: PolicySet
    distance_to_optima: float
    samplers: tuple
    vertex_advantage: dict[str, float]

    def to_report(self) -> dict:
        return {
            "n": self.sample_count,
            "approximated_dependants": self.approximated,
            "sup_error": self.sup_error,
            "distance_to_optima": self.distance_to_optima,
            "stationary": self.stationary.to_report(self.problem),
            "optima": self.optima.to_report(self.problem),
            "vertex_advantage": self.vertex_advantage,
        }


def replace_dependence(problem: DecisionProblem, dependence) -> DecisionProblem:
    return DecisionProblem(problem.actions, problem.states, problem.initial, problem.transitions, tuple(dependence), problem.name)


def approximate_problem(problem: DecisionProblem, sample_count: int):
    """Swap every non-sampleable dependence for its ``N``-sample Bernstein rule.

    Returns the new problem, the indices that were replaced and one sampler
    per dependant realizing the new dependence.
    """
    deps, samplers, replaced = [], [], []
    for j, F in enumerate(problem.dependence):
        verdict = is_sampleable(F, sample_count)
        if verdict:
            deps.append(F)
            samplers.append(verdict.sampler)
        else:
            G = bernstein_approx(F, sample_count)
            deps.append(G)
            samplers.append(G.sampler)
            replaced.append(j)
    return replace_dependence(problem, deps), replaced, tuple(samplers)


def convergence_sequence(problem: DecisionProblem, sample_counts: Sequence[int], config: SolverConfig | None = None) -> list[ConvergenceStep]:
    config = config or SolverConfig()
    targets = optimize_ex_ante(problem, config).policies
    steps = []
    for n in sample_counts:
        approx, replaced, samplers = approximate_problem(problem, n)
        err = max((sup_error(problem.dependence[j], approx.dependence[j]) for j in replaced), default=0.0)
        stationary = find_stationary(approx, config) if approx.is_differentiable() else PolicySet([], config.dedup_radius)
        optima = optimize_ex_ante(approx, config)
        advantage = {}
        for a, label in enumerate(problem.actions):
            beliefs = anthropics.gsgt_beliefs(approx, samplers, vertex(problem.num_actions, a), check=False)
            eus = cdt_eus(approx, beliefs)
            others = np.delete(eus, a)
            advantage[label] = float(eus[a] - others.max()) if others.size else 0.0
        steps.append(ConvergenceStep(n, approx, replaced, err, stationary, optima,
                                     set_distance(optima.policies, targets), samplers, advantage))
    return steps


# ---------------------------------------------------------------------------
# impossibility


@dataclass
class CandidateOutcome:
    name: str
    applicable: bool
    reason: str = ""
    faithful: bool | None = None
    fanciful: bool | None = None
    ratifiable: bool | None = None

    def to_report(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class ImpossibilityReport:
    policy: np.ndarray
    outcomes: list[CandidateOutcome]

    @property
    def passed(self) -> bool:
        """No faithful, non-fanciful candidate ratifies the policy."""
        return not any(o.applicable and o.faithful and not o.fanciful and o.ratifiable for o in self.outcomes)

    def to_report(self) -> dict:
        return {"policy": self.policy.tolist(), "passed": self.passed, "candidates": [o.to_report() for o in self.outcomes]}


BeliefCandidate = BeliefSystem | Callable[[DecisionProblem, np.ndarray], BeliefSystem]


def impossibility_check(problem: DecisionProblem, candidates: Sequence[tuple[str, BeliefCandidate]], policy) -> ImpossibilityReport:
    """Audit and ratify each candidate belief system at ``policy``.

    Callables are belief constructors; a constructor refusing the problem
    (for example needing a derivative) is recorded as inapplicable.
    """
    p = as_policy(policy, problem.num_actions)
    outcomes = []
    for name, cand in candidates:
        try:
            beliefs = cand(problem, p) if callable(cand) else cand
        except AnalysisRefusal as exc:
            outcomes.append(CandidateOutcome(name, False, str(exc)))
            continue
        audit = audit_beliefs(problem, p, beliefs)
        verdict = is_ratifiable(problem, beliefs, p)
        outcomes.append(CandidateOutcome(name, True, "; ".join(audit.details), audit.faithful, audit.fanciful, verdict.ratifiable))
    return ImpossibilityReport(p, outcomes)
