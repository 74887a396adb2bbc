"""JSON problem files.

Layout::

    {
      "name": "...",
      "actions": ["C", "D"],
      "states": [{"id": "s", "terminal": false, "dependant": 0},
                 {"id": "win", "terminal": true, "utility": 1.0}],
      "initial": {"s": 1.0},
      "transitions": {"s/C": {"win": 1.0}, "s/D": {"win": 1.0}},
      "dependants": [{"kind": "identity"}]
    }

Floats are written with ``repr`` precision, so load, save and load again
gives identical numbers.  Extra top-level sections (for example ``back_map``
on expanded problems) are preserved by :func:`load_document`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .core import DecisionProblem, StateRecord
from .depfun import from_spec
from .errors import ProblemFormatError


def problem_from_dict(doc: Mapping[str, Any]) -> DecisionProblem:
    try:
        actions = tuple(str(a) for a in doc["actions"])
        if len(set(actions)) != len(actions):
            raise ProblemFormatError("duplicate action labels")
        states = []
        for s in doc["states"]:
            terminal = bool(s.get("terminal", False))
            utility = s.get("utility")
            dependant = s.get("dependant")
            states.append(
                StateRecord(
                    id=str(s["id"]),
                    terminal=terminal,
                    utility=None if utility is None else float(utility),
                    dependant=None if dependant is None else int(dependant),
                )
            )
        position = {label: i for i, label in enumerate(actions)}
        transitions = {}
        for key, row in doc["transitions"].items():
            sid, _, label = key.rpartition("/")
            if not sid or label not in position:
                raise ProblemFormatError(f"bad transition key {key!r}")
            transitions[(sid, position[label])] = {str(t): float(p) for t, p in row.items()}
        initial = {str(s): float(p) for s, p in doc["initial"].items()}
        dependence = tuple(from_spec(spec, actions) for spec in doc["dependants"])
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ProblemFormatError):
            raise
        raise ProblemFormatError(f"malformed problem document: {exc!r}") from exc
    return DecisionProblem(actions, tuple(states), initial, transitions, dependence, str(doc.get("name", "")))


def problem_to_dict(problem: DecisionProblem) -> dict[str, Any]:
    states = []
    for s in problem.states:
        rec: dict[str, Any] = {"id": s.id, "terminal": s.terminal}
        if s.terminal:
            rec["utility"] = s.utility
        else:
            rec["dependant"] = s.dependant
        states.append(rec)
    transitions = {
        f"{sid}/{problem.actions[a]}": dict(row) for (sid, a), row in problem.transitions.items()
    }
    return {
        "name": problem.name,
        "actions": list(problem.actions),
        "states": states,
        "initial": dict(problem.initial),
        "transitions": transitions,
        "dependants": [F.to_spec(problem.actions) for F in problem.dependence],
    }


def dumps(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_document(path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc.strerror}") from exc


def load_problem(path) -> DecisionProblem:
    problem = problem_from_dict(load_document(path))
    if not problem.name:
        problem = DecisionProblem(*[getattr(problem, f) for f in ("actions", "states", "initial", "transitions", "dependence")], Path(path).stem)
    return problem


def save_problem(problem: DecisionProblem, path, extra: Mapping[str, Any] | None = None) -> None:
    doc = problem_to_dict(problem)
    if extra:
        doc.update(extra)
    Path(path).write_text(dumps(doc), encoding="utf-8")
