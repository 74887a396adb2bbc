"""Registry of the worked decision problems.

Each fixture is built in code and also shipped as a JSON problem file under
``data/fixtures``; :func:`load` reads the file (from ``$ANTHROPIC_CDT_FIXTURES``
when set) and attaches the documented expected values.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import DecisionProblem, StateRecord
from .depfun import Builtin, Identity, Linear, Polynomial, PolynomialMap, Sampler, SimulationFunction
from .errors import UnknownFixture
from .problemfile import load_problem

FIXTURE_ENV = "ANTHROPIC_CDT_FIXTURES"
PACKAGE_DIR = Path(__file__).parent / "data" / "fixtures"


@dataclass(frozen=True)
class Expected:
    value: object
    tol: float
    basis: str
    note: str = ""


@dataclass
class Fixture:
    name: str
    problem: DecisionProblem
    expected: dict[str, Expected] = field(default_factory=dict)
    differentiable: bool = True


def _problem(name, actions, nonterminal, terminal, initial, moves, dependence) -> DecisionProblem:
    """Build a problem from compact tables.

    ``nonterminal`` maps id -> dependant, ``terminal`` maps id -> utility and
    ``moves`` maps (state, action label) -> successor id or distribution.
    """
    states = [StateRecord(s, False, dependant=j) for s, j in nonterminal.items()]
    states += [StateRecord(s, True, utility=float(u)) for s, u in terminal.items()]
    index = {label: i for i, label in enumerate(actions)}
    transitions = {}
    for (s, label), target in moves.items():
        transitions[(s, index[label])] = {target: 1.0} if isinstance(target, str) else dict(target)
    return DecisionProblem(tuple(actions), tuple(states), dict(initial), transitions, tuple(dependence), name)


def newcomb() -> DecisionProblem:
    """Exact-copy predictor, then the real choice between one and two boxes."""
    return _problem(
        "newcomb",
        ["1B", "2B"],
        {"sim": 0, "full": 0, "empty": 0},
        {"million": 1_000_000, "both": 1_001_000, "nothing": 0, "thousand": 1000},
        {"sim": 1.0},
        {
            ("sim", "1B"): "full", ("sim", "2B"): "empty",
            ("full", "1B"): "million", ("full", "2B"): "both",
            ("empty", "1B"): "nothing", ("empty", "2B"): "thousand",
        },
        [Identity(2)],
    )


def newcomb75() -> DecisionProblem:
    """Coin decides between a simulated run and a uniformly random fill."""
    base = newcomb()
    return DecisionProblem(base.actions, base.states, {"sim": 0.5, "full": 0.25, "empty": 0.25},
                           base.transitions, base.dependence, "newcomb75")


def _sbpd(name, dorothea, theodora) -> DecisionProblem:
    moves = {
        ("Th0", "C"): "ThC", ("Th0", "D"): "ThD",
        ("ThC", "C"): "DoC", ("ThC", "D"): "DoD",
        ("ThD", "C"): "DoD", ("ThD", "D"): "DoD",
        ("DoC", "C"): "3", ("DoC", "D"): "5",
        ("DoD", "C"): "0", ("DoD", "D"): "2",
    }
    return _problem(
        name, ["C", "D"],
        {"Th0": 1, "ThC": 1, "ThD": 1, "DoC": 0, "DoD": 0},
        {"0": 0, "2": 2, "3": 3, "5": 5},
        {"Th0": 1.0}, moves, [dorothea, theodora],
    )


def majority_sampler() -> SimulationFunction:
    """Three samples; lean towards cooperating when most samples cooperate."""
    return SimulationFunction.from_function(
        2, 3, lambda c: [5 / 6, 1 / 6] if c[0] >= 2 else [1 / 6, 5 / 6]
    )


def theodora_cubic() -> PolynomialMap:
    # first component 1/6 + 2p^2 - 4/3 p^3 with p = pi(C) and 1 = (p + q)
    return PolynomialMap({
        (0, 0): [1 / 6, 5 / 6],
        (2, 0): [2.0, -2.0],
        (3, 0): [-4 / 3, 4 / 3],
    })


def sbpd_v1() -> DecisionProblem:
    return _sbpd("sbpd_v1", Identity(2), Polynomial(theodora_cubic()))


def sbpd_v2() -> DecisionProblem:
    return _sbpd("sbpd_v2", Linear([[0.9, 0.1], [0.1, 0.9]]), Builtin("sqrt_theodora"))


def offer_sampler() -> SimulationFunction:
    """Four samples: fill the box the agent will not take when all agree."""
    def rule(c):
        if c[0] == 4:
            return [0.0, 1.0, 0.0]
        if c[1] == 4:
            return [1.0, 0.0, 0.0]
        if c[2] == 4:
            return [0.5, 0.5, 0.0]
        return [0.0, 0.0, 1.0]
    return SimulationFunction.from_function(3, 4, rule)


def adversarial_offer() -> DecisionProblem:
    """Pay 1 to take box 1 or 2 (or take neither); a filled box holds 3.

    The predictor's action is the box it fills (``none`` fills neither), and
    state ``box_i`` means box ``i`` holds the prize.
    """
    moves = {("pred", a): f"filled_{a}" for a in ("box1", "box2", "none")}
    for filled in ("box1", "box2"):
        for a in ("box1", "box2"):
            moves[(f"filled_{filled}", a)] = "win" if a == filled else "lose"
        moves[(f"filled_{filled}", "none")] = "stay"
    moves[("filled_none", "box1")] = moves[("filled_none", "box2")] = "lose"
    moves[("filled_none", "none")] = "stay"
    return _problem(
        "adversarial_offer", ["box1", "box2", "none"],
        {"pred": 1, "filled_box1": 0, "filled_box2": 0, "filled_none": 0},
        {"win": 2, "lose": -1, "stay": 0},
        {"pred": 1.0}, moves, [Identity(3), Sampler(offer_sampler())],
    )


def wine() -> DecisionProblem:
    """Predictor poisons iff the agent drinks with positive probability."""
    moves = {}
    for a in ("1", "0"):
        moves[("x", a)] = f"x{a}"
        for b in ("1", "0"):
            moves[(f"x{a}", b)] = f"x{a}{b}"
    return _problem(
        "wine", ["1", "0"],
        {"x": 1, "x1": 0, "x0": 0},
        {"x11": -100, "x10": 0, "x01": 1, "x00": 0},
        {"x": 1.0}, moves, [Identity(2), Builtin("wine_step")],
    )


def staircase(n: int = 5, top_utility: float = 1.0) -> DecisionProblem:
    moves = {("s", "1"): "s1", ("s", "0"): "s0"}
    for i in (0, 1):
        for a in (0, 1):
            moves[(f"s{i}", str(a))] = str(i + a)
    return _problem(
        f"staircase{n}", ["1", "0"],
        {"s": 0, "s1": 0, "s0": 0},
        {"0": 0, "1": 1, "2": top_utility},
        {"s": 1.0}, moves, [Builtin("staircase", {"n": n})],
    )


def _one_shot(name, actions, utilities, dependence) -> DecisionProblem:
    terminal = {f"u_{a}": u for a, u in zip(actions, utilities)}
    moves = {("s", a): f"u_{a}" for a in actions}
    return _problem(name, actions, {"s": 0}, terminal, {"s": 1.0}, moves, [dependence])


def nrho() -> DecisionProblem:
    return _one_shot("nrho", ["1", "0"], [1.0, 0.0], Builtin("nrho"))


def k3_polynomial() -> PolynomialMap:
    """``f1 = ((p1 - 1/2)^2 + p3^2 / 4) p3``, ``f2 = f3 = (1 - f1) / 2``."""
    first = {(0, 0, 1): 0.25, (1, 0, 1): -1.0, (2, 0, 1): 1.0, (0, 0, 3): 0.25}
    terms = {(0, 0, 0): [0.0, 0.5, 0.5]}
    for exp, c in first.items():
        terms[exp] = [c, -c / 2, -c / 2]
    return PolynomialMap(terms)


def k3_nonsampleable() -> DecisionProblem:
    return _one_shot("k3_nonsampleable", ["a1", "a2", "a3"], [1.0, 0.0, 0.0], Polynomial(k3_polynomial()))


BUILDERS: dict[str, Callable[[], DecisionProblem]] = {
    "newcomb": newcomb,
    "newcomb75": newcomb75,
    "sbpd_v1": sbpd_v1,
    "sbpd_v2": sbpd_v2,
    "adversarial_offer": adversarial_offer,
    "wine": wine,
    "staircase5": staircase,
    "nrho": nrho,
    "k3_nonsampleable": k3_nonsampleable,
}

DIFFERENTIABLE = ("newcomb", "newcomb75", "sbpd_v1", "sbpd_v2", "adversarial_offer", "nrho", "k3_nonsampleable")

_THETA = 0.5 + 0.5 / math.sqrt(3)

EXPECTED: dict[str, dict[str, Expected]] = {
    "newcomb": {
        "gt_sim_credence": Expected(0.5, 1e-10, "worked example", "exact copy seen half the time"),
        "eu_one_box": Expected(1_000_000.0, 1e-6, "worked example"),
    },
    "newcomb75": {
        "gt_sim_credence": Expected(1 / 3, 1e-10, "worked example"),
        "eu_one_box": Expected(750_000.0, 1e-6, "worked example", "relative tolerance"),
        "eu_two_box": Expected(251_000.0, 1e-6, "worked example", "relative tolerance"),
    },
    "sbpd_v1": {
        "exante_opt": Expected(0.88, 0.01, "worked example", "pi(C) at the optimum"),
        "stationary": Expected((0.0, 0.36, 0.88), 0.01, "worked example", "pi(C) of every stationary policy"),
        "eu_pure_c": Expected(25 / 12, 1e-10, "worked example"),
        "gsgt_theodora_credence": Expected(6 / 7, 1e-10, "worked example", "three samples for the second dependant"),
        "gsgt_pure_advantage": Expected(-2 / 7, 1e-9, "worked example", "C over D at either pure policy"),
    },
    "sbpd_v2": {
        "stationary": Expected((1.0,), 1e-6, "worked example", "pure C only"),
        "eu_pure_c": Expected(2.9, 1e-10, "worked example"),
        "ggt_dorothea_credence": Expected(1 / 6, 1e-10, "worked example", "weights (0.8, 2)"),
        "ggt_advantage": Expected(1 / 6, 1e-9, "worked example", "weights (0.8, 2), any policy"),
        "lsgt_pure_c_advantage": Expected(4 / 15, 1e-9, "worked example"),
    },
    "adversarial_offer": {
        "theta": Expected(_THETA, 1e-4, "closed form", "or its mirror 1 - theta"),
        "take_probability": Expected(0.046, 0.005, "worked example"),
        "theta_objective": Expected(1 / 12, 1e-8, "closed form"),
    },
    "wine": {
        "exante_opt": Expected((0.0, 1.0), 1e-9, "worked example", "never drink"),
        "exante_value": Expected(0.0, 1e-9, "worked example"),
    },
    "nrho": {"gamma_half": Expected(2.0, 1e-9, "closed form", "minimal weight at p = 1/2")},
    "k3_nonsampleable": {},
    "staircase5": {},
}


def fixture_dir() -> Path:
    override = os.environ.get(FIXTURE_ENV)
    return Path(override) if override else PACKAGE_DIR


def names() -> list[str]:
    return list(BUILDERS)


def _canonical(name: str) -> tuple[str, dict]:
    m = re.fullmatch(r"staircase[(:]?(\d+)\)?", name)
    if m:
        return f"staircase{int(m.group(1))}", {"n": int(m.group(1))}
    return name, {}


def build(name: str) -> DecisionProblem:
    """Construct a fixture in code, bypassing the files on disk."""
    key, params = _canonical(name)
    if params:
        return staircase(**params)
    if key not in BUILDERS:
        raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(names())}")
    return BUILDERS[key]()


def load(name: str) -> Fixture:
    """Load a fixture by name from the fixture directory.

    ``staircase(n)`` / ``staircase:n`` / ``staircaseN`` pick the staircase
    with ``n`` steps, built in code when no file exists for it.
    """
    key, params = _canonical(name)
    path = fixture_dir() / f"{key}.json"
    if path.exists():
        problem = load_problem(path)
    elif params or key in BUILDERS:
        if not params and os.environ.get(FIXTURE_ENV):
            raise UnknownFixture(f"fixture {name!r} not found in {fixture_dir()}")
        problem = build(key)
    else:
        raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(names())}")
    return Fixture(key, problem, dict(EXPECTED.get(key, {})), problem.is_differentiable())


def write_all(directory: Path | None = None) -> list[Path]:
    """Regenerate the shipped problem files from the builders."""
    from .problemfile import save_problem

    directory = Path(directory or PACKAGE_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, builder in BUILDERS.items():
        path = directory / f"{name}.json"
        save_problem(builder(), path)
        paths.append(path)
    return paths


def ggt_samplers(problem: DecisionProblem):
    """Samplers for every dependant whose map has an exact sampling form."""
    from .depfun import is_sampleable

    out = []
    for F in problem.dependence:
        if isinstance(F, Sampler):
            out.append(F.sampler)
            continue
        verdict = is_sampleable(F, 60)
        out.append(verdict.sampler if verdict else None)
    return out


def random_policies(k: int, count: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).dirichlet(np.ones(k), size=count)
