"""Reference-result checks over the shipped fixtures.

Each ``criterion_*`` function recomputes one group of published numbers
with the library and compares them, at fixed tolerances, against values
obtained by a separate route (closed forms, bisection, a second algorithm
or sampling).  ``run_all`` drives them for the ``verify-paper`` command and
the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fixtures
from .anthropics import (
    BeliefSystem,
    audit_beliefs,
    ggt_beliefs,
    ggt_components,
    gsgt_beliefs,
    gt_beliefs,
)
from .cdt import (
    cdt_eus,
    convergence_sequence,
    find_stationary,
    grad_identity_residual,
    impossibility_check,
    is_ratifiable,
    optimize_ex_ante,
    satisfies_gradient_condition,
)
from .core import DecisionProblem, solve_at
from .montecarlo import validate as mc_validate
from .simcompile import expand_problem, verify_expansion
from .simplex import vertex

SBPD_QUINTIC = (32.0, -80.0, 48.0, -4.0, 4.0, -2.0)  # highest power first


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] criterion {self.number:2d}: {self.title} ({self.seconds:.2f} s)"

    def to_report(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "seconds": self.seconds, "details": self.details}


def _timed(number: int, title: str, body: Callable[[dict], bool], limit: float | None = None) -> CriterionResult:
    details: dict = {}
    start = time.perf_counter()
    ok = bool(body(details))
    elapsed = time.perf_counter() - start
    if limit is not None:
        details["time_limit_s"] = limit
        ok = ok and elapsed < limit
    return CriterionResult(number, title, ok, elapsed, details)


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13) -> float:
    """Plain bisection; ``f(lo)`` and ``f(hi)`` must differ in sign."""
    flo = f(lo)
    if flo * f(hi) > 0:
        raise ValueError("no sign change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quintic_roots_by_bisection(coefs=SBPD_QUINTIC, cells: int = 1000) -> list[float]:
    f = lambda p: float(np.polyval(coefs, p))  # noqa: E731
    edges = np.linspace(0.0, 1.0, cells + 1)
    return [bisect_root(f, a, b) for a, b in zip(edges[:-1], edges[1:]) if f(a) * f(b) < 0]


def _random_policies(k: int, count: int, seed: int) -> np.ndarray:
    return fixtures.random_policies(k, count, seed)


def _two_point(p: float) -> np.ndarray:
    return np.array([p, 1.0 - p])


def _dependant_credence(problem: DecisionProblem, beliefs: BeliefSystem, j: int) -> float:
    return float(beliefs.credences[problem.arrays.owner == j].sum())


# ---------------------------------------------------------------------------


def criterion_1(seed: int = 0) -> CriterionResult:
    def body(d):
        problem = fixtures.load("sbpd_v1").problem
        found = find_stationary(problem)
        ps = sorted(float(x[0]) for x in found.policies)
        roots = quintic_roots_by_bisection()
        d["stationary_pC"] = ps
        d["bisection_roots"] = roots
        if len(ps) != 3 or len(roots) != 2:
            return False
        pure_d = abs(ps[0]) < 1e-12
        near = abs(ps[1] - 0.36) <= 0.01 and abs(ps[2] - 0.88) <= 0.01
        agree = max(abs(ps[1] - roots[0]), abs(ps[2] - roots[1]))
        d["solver_vs_bisection"] = agree
        return pure_d and near and agree <= 1e-10
    return _timed(1, "sbpd_v1 stationary set {pure D, 0.36, 0.88}, roots agree with bisection", body, limit=5.0)


def criterion_2(seed: int = 0) -> CriterionResult:
    def body(d):
        problem = fixtures.load("sbpd_v1").problem
        samplers = fixtures.ggt_samplers(problem)
        eu = solve_at(problem, [1, 0]).ex_ante_eu
        d["eu_pure_C"] = eu
        ok = abs(eu - 25 / 12) <= 1e-10
        for label, pi in (("C", [1.0, 0.0]), ("D", [0.0, 1.0])):
            beliefs = gsgt_beliefs(problem, samplers, pi)
            cred = _dependant_credence(problem, beliefs, 1)
            eus = cdt_eus(problem, beliefs)
            adv = float(eus[0] - eus[1])
            d[f"pure_{label}"] = {"theodora_credence": cred, "advantage_C": adv}
            ok &= abs(cred - 6 / 7) <= 1e-10 and abs(adv + 2 / 7) <= 1e-9
        return ok
    return _timed(2, "sbpd_v1 EU 25/12, GSGT credence 6/7, advantage -2/7", body)


def criterion_3(seed: int = 0) -> CriterionResult:
    def body(d):
        problem = fixtures.load("sbpd_v2").problem
        found = find_stationary(problem)
        d["stationary"] = [x.tolist() for x in found.policies]
        ok = len(found) == 1 and np.abs(found.policies[0] - [1.0, 0.0]).max() <= 1e-9
        tested = [_two_point(p) for p in (0.0, 0.3, 0.5, 1.0)] + list(_random_policies(2, 16, seed))
        worst_cred = worst_adv = 0.0
        for pi in tested:
            comps = ggt_components(problem, pi, (0.8, 2.0), strict=False)
            beliefs = ggt_beliefs(problem, pi, comps)
            cred = (_dependant_credence(problem, beliefs, 0), _dependant_credence(problem, beliefs, 1))
            eus = cdt_eus(problem, beliefs)
            worst_cred = max(worst_cred, abs(cred[0] - 1 / 6), abs(cred[1] - 5 / 6))
            worst_adv = max(worst_adv, abs(float(eus[0] - eus[1]) - 1 / 6))
        eu = solve_at(problem, [1, 0]).ex_ante_eu
        d.update(credence_error=worst_cred, advantage_error=worst_adv, eu_pure_C=eu, tested=len(tested))
        return ok and worst_cred <= 1e-10 and worst_adv <= 1e-9 and abs(eu - 2.9) <= 1e-10
    return _timed(3, "sbpd_v2 stationary {pure C}, GGT credences 1/6, 5/6, advantage 1/6, EU 2.9", body)


def criterion_4(seed: int = 0) -> CriterionResult:
    def body(d):
        problem = fixtures.load("newcomb75").problem
        cred = dict(zip(problem.nonterminal_ids, gt_beliefs(problem, [1, 0]).credences))
        one, two = solve_at(problem, [1, 0]).ex_ante_eu, solve_at(problem, [0, 1]).ex_ante_eu
        d.update(sim_credence=cred["sim"], eu_one_box=one, eu_two_box=two)
        return (abs(cred["sim"] - 1 / 3) <= 1e-10 and abs(one - 750_000) <= 1e-6 * 750_000
                and abs(two - 251_000) <= 1e-6 * 251_000)
    return _timed(4, "newcomb75 GT credence 1/3, EU 750000 / 251000", body)


def criterion_5(seed: int = 0) -> CriterionResult:
    theta_star = 0.5 + 0.5 / math.sqrt(3)

    def body(d):
        problem = fixtures.load("adversarial_offer").problem
        optima = optimize_ex_ante(problem)
        ok = len(optima) > 0
        rows = []
        for x in optima.policies:
            take = 1.0 - float(x[2])
            theta = float(x[0]) / take
            objective = theta * (1 - theta) * (theta**3 + (1 - theta) ** 3)
            rows.append({"policy": x.tolist(), "theta": theta, "take_probability": take, "objective": objective})
            ok &= min(abs(theta - theta_star), abs(theta - (1 - theta_star))) <= 1e-4
            ok &= abs(take - 0.046) <= 0.005
            ok &= abs(objective - 1 / 12) <= 1e-8
        d["optima"] = rows
        return ok
    return _timed(5, "adversarial_offer optimum theta = 1/2 + 1/(2 sqrt 3), p = 0.046, objective 1/12", body)


def criterion_6(seed: int = 0) -> CriterionResult:
    def body(d):
        worst = {}
        for name in ("sbpd_v1", "sbpd_v2", "newcomb75", "adversarial_offer"):
            problem = fixtures.load(name).problem
            worst[name] = max(grad_identity_residual(problem, pi)
                              for pi in _random_policies(problem.num_actions, 20, seed))
        d["max_residual"] = worst
        return max(worst.values()) < 1e-6
    return _timed(6, "gradient identity residual < 1e-6 at 20 random anchors per fixture", body, limit=10.0)


def criterion_7(seed: int = 0) -> CriterionResult:
    def body(d):
        ok = True
        for name in ("sbpd_v1", "adversarial_offer"):
            problem = fixtures.load(name).problem
            samplers = fixtures.ggt_samplers(problem)
            expanded = expand_problem(problem, samplers)
            errors = np.zeros(4)
            for pi in _random_policies(problem.num_actions, 20, seed):
                report = verify_expansion(problem, expanded, samplers, pi)
                ok &= report.passed
                errors = np.maximum(errors, [c.error for c in report.checks])
            d[name] = dict(zip(("eu", "credences", "counterfactuals", "dynamics"), errors.tolist()))
        return ok
    return _timed(7, "expansion equivalence, four checks at 20 random policies", body)


def criterion_8(seed: int = 0) -> CriterionResult:
    def body(d):
        problem = fixtures.load("sbpd_v2").problem
        steps = convergence_sequence(problem, [4, 8, 16, 32, 64])
        errs = [s.sup_error for s in steps]
        last = steps[-1]
        adv = last.vertex_advantage[problem.actions[0]]
        target = 0.8 / (2 * last.sample_count + 1)
        d.update(sup_errors=errs, distance_at_64=last.distance_to_optima, advantage_at_64=adv, reference=target)
        decreasing = all(b < a for a, b in zip(errs, errs[1:]))
        return decreasing and last.distance_to_optima <= 0.02 and abs(adv - target) <= 0.3 * target
    return _timed(8, "Bernstein approximation of sbpd_v2 converges (N = 4..64)", body)


def criterion_9(seed: int = 0) -> CriterionResult:
    def body(d):
        ok = True
        worst = {}
        for name in fixtures.names():
            problem = fixtures.load(name).problem
            zs = []
            for i, pi in enumerate(_random_policies(problem.num_actions, 3, seed)):
                report = mc_validate(problem, pi, rollouts=100_000, seed=seed + i)
                ok &= report.passed
                zs.append(max(abs(c.z) for c in report.checks))
            worst[name] = max(zs)
        problem = fixtures.load("sbpd_v1").problem
        a = mc_validate(problem, [0.4, 0.6], 20_000, seed).to_report()
        b = mc_validate(problem, [0.4, 0.6], 20_000, seed).to_report()
        d.update(max_abs_z=worst, deterministic=a == b)
        return ok and a == b
    return _timed(9, "Monte Carlo agrees with the chain solver (|z| <= 4, 1e5 rollouts)", body, limit=60.0)


def hand_built_wine_beliefs(problem: DecisionProblem, policy, copy_credence: float = 1e-3) -> BeliefSystem:
    """Faithful, non-fanciful beliefs at never-drink: a little credence on the
    reachable copy state, identity transforms for the agent's copies and a
    predictor that does not react to the deviation."""
    policy = np.asarray(policy, dtype=float)
    cred = np.array([1.0 - copy_credence if s == "x" else copy_credence if s == "x0" else 0.0
                     for s in problem.nonterminal_ids])
    k = problem.num_actions
    predictor = np.repeat(problem.dependence_policies(policy)[1][None], k, axis=0)
    return BeliefSystem("hand-built", cred, np.array([np.eye(k), predictor]), policy)


def criterion_10(seed: int = 0) -> CriterionResult:
    def body(d):
        ok = True
        mismatches, unfaithful = [], []
        for name in fixtures.DIFFERENTIABLE:
            problem = fixtures.load(name).problem
            k = problem.num_actions
            policies = [vertex(k, a) for a in range(k)] + list(_random_policies(k, 50, seed))
            policies += [e.policy for e in find_stationary(problem)]
            for pi in policies:
                beliefs = ggt_beliefs(problem, pi)
                if is_ratifiable(problem, beliefs, pi).ratifiable != satisfies_gradient_condition(problem, pi):
                    mismatches.append((name, pi.tolist()))
                audit = audit_beliefs(problem, pi, beliefs)
                if not audit.faithful or audit.fanciful:
                    unfaithful.append((name, pi.tolist(), audit.details))
        d["equivalence_mismatches"] = mismatches
        d["audit_failures"] = unfaithful
        ok &= not mismatches and not unfaithful

        wine = fixtures.load("wine").problem
        never = np.array([0.0, 1.0])
        report = impossibility_check(wine, [
            ("GGT", ggt_beliefs),
            ("hand-built", hand_built_wine_beliefs(wine, never)),
            ("hand-built, even split", hand_built_wine_beliefs(wine, never, 0.5)),
        ], never)
        d["wine"] = report.to_report()
        refused = [o for o in report.outcomes if o.name == "GGT"][0]
        ok &= report.passed and not refused.applicable
        ok &= all(o.applicable and o.faithful and not o.fanciful for o in report.outcomes if o.name != "GGT")

        nrho = fixtures.load("nrho").problem
        gamma = float(ggt_components(nrho, [0.5, 0.5]).gamma[0])
        d["nrho_gamma_half"] = gamma
        ok &= abs(gamma - 2.0) <= 1e-9

        problem = fixtures.load("sbpd_v1").problem
        samplers = fixtures.ggt_samplers(problem)
        padded = [g.with_ignored_slot() for g in samplers]
        flips = []
        policies = [vertex(2, 0), vertex(2, 1)] + list(_random_policies(2, 20, seed))
        policies += [e.policy for e in find_stationary(problem)]
        for pi in policies:
            a = is_ratifiable(problem, gsgt_beliefs(problem, samplers, pi), pi).ratifiable
            b = is_ratifiable(problem, gsgt_beliefs(problem, padded, pi), pi).ratifiable
            if a != b:
                flips.append(pi.tolist())
        d["redundant_sample_flips"] = flips
        return ok and not flips
    return _timed(10, "property suites: ratifiable iff stationary, GGT faithful, wine impossibility, "
                      "nrho minimal weight 2, redundant-sample invariance", body)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(seed: int = 0, only: set[int] | None = None) -> list[CriterionResult]:
    return [c(seed) for i, c in enumerate(CRITERIA, start=1) if only is None or i in only]
