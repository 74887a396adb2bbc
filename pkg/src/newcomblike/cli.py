"""Command line entry point: ``newcomblike <command> <problem> [options]``.

``<problem>`` is a path to a problem file or the name of a shipped fixture.
Exit status is 0 on success, 1 when an analysis is refused for a valid input
and 2 for malformed input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, fixtures
from .anthropics import ggt_beliefs, ggt_components, gsgt_beliefs, gt_beliefs, lsgt_from_simple_cases
from .cdt import (
    SolverConfig,
    cdt_eus,
    convergence_sequence,
    find_stationary,
    is_ratifiable,
    optimize_ex_ante,
)
from .checks import run_all
from .core import DecisionProblem, check_termination, ex_ante_grad, solve_at, validate
from .errors import AnalysisRefusal, BeliefsUnavailable, InputError
from .montecarlo import dump_histories, simulate, validate as mc_validate
from .problemfile import load_problem, problem_to_dict, dumps
from .report import render, to_csv
from .simcompile import expand_problem, verify_expansion
from .simplex import as_policy

EXIT_OK, EXIT_REFUSED, EXIT_INPUT = 0, 1, 2
DEFAULT_SWEEP = 100


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def _rho(text: str | None):
    if text is None:
        return None
    out = []
    for item in text.split(","):
        item = item.strip()
        if item in ("", "-"):
            out.append(None)
            continue
        try:
            out.append(float(item))
        except ValueError as exc:
            raise InputError(f"bad weight {item!r}") from exc
    return out


def load_any(spec: str) -> DecisionProblem:
    """A problem file when ``spec`` names one, otherwise a fixture."""
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        return load_problem(path)
    return fixtures.load(spec).problem


def _policy(args, problem: DecisionProblem) -> np.ndarray:
    if args.policy is None:
        return np.full(problem.num_actions, 1.0 / problem.num_actions)
    return as_policy(_floats(args.policy), problem.num_actions)


def _config(args) -> SolverConfig:
    kwargs = {"seed": args.seed}
    if args.grid is not None:
        kwargs["grid"] = args.grid
    if args.restarts is not None:
        kwargs["restarts"] = args.restarts
    if args.tol is not None:
        kwargs["condition_tol"] = args.tol
    return SolverConfig(**kwargs)


def _samplers(problem: DecisionProblem):
    samplers = fixtures.ggt_samplers(problem)
    missing = [j for j, g in enumerate(samplers) if g is None]
    if missing:
        raise BeliefsUnavailable(f"no exact sampling model for dependants {missing}")
    return samplers


def _beliefs(problem: DecisionProblem, kind: str, policy, rho):
    """Belief system of ``kind`` plus the GGT component report when relevant."""
    if kind == "gt":
        return gt_beliefs(problem, policy), None
    if kind == "gsgt":
        return gsgt_beliefs(problem, _samplers(problem), policy), None
    if kind == "lsgt":
        return lsgt_from_simple_cases(problem, policy), None
    comps = ggt_components(problem, policy, rho, strict=False)
    return ggt_beliefs(problem, policy, comps), comps


# ---------------------------------------------------------------------------
# commands; each returns (report dict or csv text, exit status)


def cmd_validate(args):
    problem = load_any(args.problem)
    diagnostics = validate(problem)
    report = {"problem": problem.name, "valid": not diagnostics,
              "diagnostics": [{"code": d.code, "location": d.location, "message": d.message} for d in diagnostics]}
    if diagnostics:
        return report, EXIT_INPUT
    verdict = check_termination(problem)
    report["terminates"] = verdict.terminates
    if not verdict.terminates:
        report["trapping_set"] = list(verdict.trapping_states)
        report["trapping_policy"] = list(verdict.witness_policy)
        return report, EXIT_REFUSED
    return report, EXIT_OK


def _analysis_row(problem, policy, kind, rho):
    sol = solve_at(problem, policy)
    grad = ex_ante_grad(problem, policy, sol)
    beliefs, _ = _beliefs(problem, kind, policy, rho)
    eus = cdt_eus(problem, beliefs)
    return sol, grad, eus


def cmd_analyze(args):
    problem = load_any(args.problem)
    if args.format == "csv":
        if problem.num_actions != 2:
            raise InputError("the CSV sweep needs exactly two actions")
        n = args.grid or DEFAULT_SWEEP
        rows = []
        for p in np.linspace(0.0, 1.0, n + 1):
            _, grad, eus = _analysis_row(problem, np.array([p, 1.0 - p]), args.kind, _rho(args.rho))
            rows.append((float(p), solve_at(problem, [p, 1.0 - p]).ex_ante_eu, float(grad[0]), float(eus[0] - eus[1])))
        return to_csv(("p", "exante_eu", "grad_C", "cdt_adv_C"), rows), EXIT_OK
    policy = _policy(args, problem)
    sol = solve_at(problem, policy)
    report = {
        "problem": problem.name,
        "policy": policy.tolist(),
        "ex_ante_eu": sol.ex_ante_eu,
        "visit_counts": sol.visits(problem),
        "state_values": sol.values(problem),
        "dependant_policies": problem.dependence_policies(policy).tolist(),
    }
    if problem.is_differentiable():
        report["grad"] = dict(zip(problem.actions, ex_ante_grad(problem, policy, sol).tolist()))
    else:
        report["grad"] = "derivative unavailable"
    return report, EXIT_OK


def cmd_beliefs(args):
    problem = load_any(args.problem)
    policy = _policy(args, problem)
    beliefs, comps = _beliefs(problem, args.kind, policy, _rho(args.rho))
    report = {"problem": problem.name, **beliefs.to_report(problem)}
    owner = problem.arrays.owner
    report["dependant_credences"] = [float(beliefs.credences[owner == j].sum()) for j in range(problem.num_dependants)]
    if comps is not None:
        report["ggt"] = comps.to_report(problem)
    return report, EXIT_OK


def cmd_ratify(args):
    problem = load_any(args.problem)
    policy = _policy(args, problem)
    beliefs, comps = _beliefs(problem, args.kind, policy, _rho(args.rho))
    verdict = is_ratifiable(problem, beliefs, policy, tol=args.tol or 1e-7)
    report = {"problem": problem.name, **verdict.to_report(problem)}
    if comps is not None:
        report["transforms_in_simplex"] = comps.proper
    return report, EXIT_OK


def cmd_solve(args):
    problem = load_any(args.problem)
    config = _config(args)
    report = {"problem": problem.name}
    if problem.is_differentiable():
        report["stationary"] = find_stationary(problem, config, _rho(args.rho)).to_report(problem)
    else:
        report["stationary"] = "derivative unavailable"
    report["ex_ante_optima"] = optimize_ex_ante(problem, config).to_report(problem)
    return report, EXIT_OK


def cmd_compile_sim(args):
    problem = load_any(args.problem)
    samplers = _samplers(problem)
    expanded = expand_problem(problem, samplers)
    if args.policy is not None:
        policies = [_policy(args, problem)]
    else:
        policies = list(fixtures.random_policies(problem.num_actions, 5, args.seed))
    checks = [verify_expansion(problem, expanded, samplers, pi).to_report() for pi in policies]
    report = {
        "problem": problem.name,
        "sample_counts": [g.sample_count for g in samplers],
        "expanded_states": len(expanded.problem.states),
        "verification": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if args.out_problem:
        doc = problem_to_dict(expanded.problem)
        doc["back_map"] = expanded.back_map_section()
        Path(args.out_problem).write_text(dumps(doc), encoding="utf-8")
        report["written"] = args.out_problem
    return report, EXIT_OK if report["passed"] else EXIT_REFUSED


def cmd_approx(args):
    problem = load_any(args.problem)
    ns = [int(x) for x in _floats(args.n_list)]
    if any(n < 1 for n in ns):
        raise InputError("sample counts must be positive")
    steps = convergence_sequence(problem, ns, _config(args))
    if args.format == "csv":
        rows = [(s.sample_count, s.sup_error, s.distance_to_optima) for s in steps]
        return to_csv(("n", "sup_error", "distance_to_optima"), rows), EXIT_OK
    return {"problem": problem.name, "steps": [s.to_report() for s in steps]}, EXIT_OK


def cmd_simulate(args):
    problem = load_any(args.problem)
    policy = _policy(args, problem)
    report = mc_validate(problem, policy, rollouts=args.rollouts, seed=args.seed).to_report()
    report["problem"] = problem.name
    if args.dump:
        batch = simulate(problem, problem.dependence_policies(policy), args.rollouts, args.seed, record=True)
        Path(args.dump).write_text(dump_histories(batch, args.seed), encoding="utf-8")
    return report, EXIT_OK if report["passed"] else EXIT_REFUSED


def cmd_verify_paper(args):
    results = run_all(seed=args.seed)
    if args.format == "json":
        report = {"seed": args.seed, "passed": all(r.passed for r in results),
                  "criteria": [r.to_report() for r in results]}
        return report, EXIT_OK if report["passed"] else EXIT_REFUSED
    lines = [r.line() for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} criteria passed")
    return "\n".join(lines) + "\n", EXIT_OK if passed == len(results) else EXIT_REFUSED


COMMANDS = {
    "validate": (cmd_validate, "check structure and termination of a problem"),
    "analyze": (cmd_analyze, "chain quantities and gradient at a policy (CSV: sweep over p)"),
    "beliefs": (cmd_beliefs, "credences and transforms at a policy"),
    "ratify": (cmd_ratify, "causal advantages and the ratifiability verdict at a policy"),
    "solve": (cmd_solve, "stationary (ratifiable) policies and ex ante optima"),
    "compile-sim": (cmd_compile_sim, "expand sampler dependences into copy trees and verify"),
    "approx": (cmd_approx, "Bernstein approximation sequence over sample counts"),
    "simulate": (cmd_simulate, "Monte Carlo check of chain quantities"),
    "verify-paper": (cmd_verify_paper, "run every reference check over the fixtures"),
}

CSV_COMMANDS = {"analyze", "approx", "verify-paper"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="newcomblike", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        if name != "verify-paper":
            p.add_argument("problem", help="problem file or fixture name")
        p.add_argument("--policy", help="comma-separated action probabilities")
        p.add_argument("--kind", choices=("gt", "gsgt", "lsgt", "ggt"), default="ggt")
        p.add_argument("--rho", help="comma-separated GGT weights; empty entries keep the minimum")
        p.add_argument("--grid", type=int, help="lattice resolution (>= 10)")
        p.add_argument("--restarts", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--n-list", default="4,8,16,32,64")
        p.add_argument("--rollouts", type=int, default=100_000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--out", help="write the report here instead of stdout")
        if name == "compile-sim":
            p.add_argument("--out-problem", help="write the expanded problem file here")
        if name == "simulate":
            p.add_argument("--dump", help="write one JSON line per rollout here")
    return parser


def _check_args(args) -> None:
    if args.grid is not None and args.grid < 10:
        raise InputError("--grid must be at least 10")
    if args.tol is not None and not args.tol > 0:
        raise InputError("--tol must be positive")
    if args.restarts is not None and args.restarts < 0:
        raise InputError("--restarts must be nonnegative")
    if args.rollouts < 2:
        raise InputError("--rollouts must be at least 2")
    if args.format == "csv" and args.command not in CSV_COMMANDS:
        raise InputError(f"{args.command} has no CSV output")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        _check_args(args)
        result, status = handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AnalysisRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    text = result if isinstance(result, str) else render(result, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
