"""Dependence functions: maps from the agent's mixed policy to a dependant's.

Every variant evaluates on the simplex, returns directional derivatives along
``e_a - pi`` (:meth:`DependenceFunction.delta`) and serializes to the
dicts used in problem files.  The module also holds the polynomial machinery
that turns a polynomial dependence into an explicit sampling rule and back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial as Poly1D

from .errors import (
    CapExceeded,
    InvalidPolicy,
    NotASimplexMap,
    NotDifferentiable,
    ProblemFormatError,
    RangeViolation,
    RewriteFailed,
)
from .simplex import (
    RENORMALIZE_TOL,
    as_policy,
    compositions,
    multinomial,
    multinomial_array,
    num_compositions,
    simplex_grid,
    vertex,
)

GRID_RESOLUTION = 20
GRID_TOL = 1e-9
CLAMP_TOL = 1e-12
FD_STEP = 1e-6
ENUMERATION_CAP = 10**6


def _check_maps_into_simplex(fn, k: int, resolution: int = GRID_RESOLUTION) -> None:
    for point in simplex_grid(k, resolution):
        out = np.asarray(fn(point), dtype=float)
        if out.shape != (k,):
            raise RangeViolation(f"dependence returns shape {out.shape}, expected ({k},)")
        if out.min() < -GRID_TOL or abs(out.sum() - 1.0) > GRID_TOL:
            raise RangeViolation(f"dependence leaves the simplex at {point.tolist()}: {out.tolist()}")


def _to_simplex(raw: np.ndarray) -> np.ndarray:
    try:
        return as_policy(raw, tol=RENORMALIZE_TOL)
    except InvalidPolicy as exc:
        raise RangeViolation(f"range violation: {raw.tolist()}") from exc


class DependenceFunction:
    """Base class.  Subclasses implement ``_raw`` and usually ``_jacobian``."""

    kind: str = "abstract"
    differentiable: bool = True

    def __init__(self, num_actions: int):
        if num_actions < 1:
            raise ProblemFormatError("need at least one action")
        self.num_actions = int(num_actions)

    def __call__(self, policy) -> np.ndarray:
        p = as_policy(policy, self.num_actions)
        return _to_simplex(np.asarray(self._raw(p), dtype=float))

    evaluate = __call__

    def _raw(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def delta(self, action: int, policy) -> np.ndarray:
        """Directional derivative of the map along ``e_action - policy``."""
        p = as_policy(policy, self.num_actions)
        return self._delta(action, p)

    def _delta(self, action: int, p: np.ndarray) -> np.ndarray:
        if not self.differentiable:
            raise NotDifferentiable()
        direction = vertex(self.num_actions, action) - p
        d = self._jacobian(p) @ direction
        return d - d.mean() if d.size else d

    def deltas(self, policy) -> np.ndarray:
        """Matrix whose row ``a`` is :meth:`delta` for action ``a``."""
        p = as_policy(policy, self.num_actions)
        return np.array([self._delta(a, p) for a in range(self.num_actions)])

    def is_identity(self) -> bool:
        return False

    def to_spec(self, labels: Sequence[str]) -> dict:
        raise ProblemFormatError(f"{self.kind} dependence cannot be serialized")


class Identity(DependenceFunction):
    kind = "identity"

    def _raw(self, p):
        return p

    def _delta(self, action, p):
        return vertex(self.num_actions, action) - p

    def is_identity(self):
        return True

    def to_spec(self, labels):
        return {"kind": "identity"}


class Constant(DependenceFunction):
    kind = "constant"

    def __init__(self, policy):
        value = as_policy(policy)
        super().__init__(value.size)
        self.value = value

    def _raw(self, p):
        return self.value

    def _delta(self, action, p):
        return np.zeros(self.num_actions)

    def to_spec(self, labels):
        return {"kind": "constant", "policy": self.value.tolist()}


class Linear(DependenceFunction):
    """``F(pi) = sum_a pi(a) * columns[a]`` with each column a policy."""

    kind = "linear"

    def __init__(self, columns):
        cols = np.array(columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != cols.shape[1]:
            raise ProblemFormatError("linear dependence needs |A| columns of length |A|")
        cols = np.array([as_policy(c) for c in cols])
        super().__init__(cols.shape[0])
        self.columns = cols

    def _raw(self, p):
        return p @ self.columns

    def _delta(self, action, p):
        return self.columns[action] - p @ self.columns

    def is_identity(self):
        return np.array_equal(self.columns, np.eye(self.num_actions))

    def to_spec(self, labels):
        return {"kind": "linear", "columns": self.columns.tolist()}


# ---------------------------------------------------------------------------
# polynomials


class PolynomialMap:
    """Vector-valued polynomial ``sum_e c_e * prod_a pi(a)**e[a]``.

    Terms live in a dict from exponent tuples to coefficient vectors; like
    terms are merged on construction.
    """

    def __init__(self, terms: Mapping[tuple, Sequence[float]] | Sequence, num_actions: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple, np.ndarray] = {}
        for exp, coef in items:
            exp = tuple(int(e) for e in exp)
            if any(e < 0 for e in exp):
                raise ProblemFormatError(f"negative exponent {exp}")
            coef = np.array(coef, dtype=float)
            if exp in merged:
                merged[exp] = merged[exp] + coef
            else:
                merged[exp] = coef
        if num_actions is None:
            if not merged:
                raise ProblemFormatError("empty polynomial needs num_actions")
            num_actions = len(next(iter(merged)))
        for exp, coef in merged.items():
            if len(exp) != num_actions or coef.shape != (num_actions,):
                raise ProblemFormatError(f"term {exp} does not match {num_actions} actions")
        self.num_actions = num_actions
        self.terms = dict(sorted(merged.items(), reverse=True))
        self._exps = np.array(list(self.terms), dtype=np.int64).reshape(-1, num_actions)
        self._coefs = np.array(list(self.terms.values()), dtype=float).reshape(-1, num_actions)

    @property
    def degree(self) -> int:
        return int(self._exps.sum(axis=1).max()) if len(self._exps) else 0

    def is_homogeneous(self) -> bool:
        return len(set(self._exps.sum(axis=1).tolist())) <= 1

    def min_coefficient(self) -> float:
        return float(self._coefs.min()) if self._coefs.size else 0.0

    def __call__(self, policy) -> np.ndarray:
        p = np.asarray(policy, dtype=float)
        monomials = np.prod(p ** self._exps, axis=1)
        return monomials @ self._coefs

    def jacobian(self, policy) -> np.ndarray:
        """``J[i, b] = d F_i / d pi(b)`` of this particular representation."""
        p = np.asarray(policy, dtype=float)
        k = self.num_actions
        jac = np.zeros((k, k))
        for b in range(k):
            e = self._exps.copy()
            factor = e[:, b].astype(float)
            e[:, b] = np.maximum(e[:, b] - 1, 0)
            jac[:, b] = (factor * np.prod(p ** e, axis=1)) @ self._coefs
        return jac

    def coefficient(self, exp) -> np.ndarray:
        return self.terms.get(tuple(exp), np.zeros(self.num_actions))

    def __eq__(self, other):
        if not isinstance(other, PolynomialMap):
            return NotImplemented
        return self.num_actions == other.num_actions and self.terms.keys() == other.terms.keys() and all(
            np.array_equal(self.terms[e], other.terms[e]) for e in self.terms
        )

    def allclose(self, other: "PolynomialMap", atol: float = 1e-10) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(np.allclose(self.coefficient(e), other.coefficient(e), atol=atol, rtol=0) for e in keys)

    def __repr__(self):
        return f"PolynomialMap(degree={self.degree}, terms={len(self.terms)})"

    @classmethod
    def identity(cls, k: int) -> "PolynomialMap":
        return cls({tuple(np.eye(k, dtype=int)[a]): np.eye(k)[a] for a in range(k)})

    @classmethod
    def constant(cls, value) -> "PolynomialMap":
        value = np.asarray(value, dtype=float)
        return cls({(0,) * value.size: value})

    def to_spec_terms(self) -> list[dict]:
        return [{"exp": list(e), "coef": c.tolist()} for e, c in self.terms.items()]


class Polynomial(DependenceFunction):
    kind = "poly"

    def __init__(self, poly: PolynomialMap):
        super().__init__(poly.num_actions)
        self.poly = poly
        _check_maps_into_simplex(poly, self.num_actions)

    def _raw(self, p):
        return self.poly(p)

    def _jacobian(self, p):
        return self.poly.jacobian(p)

    def to_spec(self, labels):
        return {"kind": "poly", "terms": self.poly.to_spec_terms()}


# ---------------------------------------------------------------------------
# samplers


class SimulationFunction:
    """An ``N``-sample rule ``g: A^N -> Delta(A)``.

    Build it either from a full ``table`` keyed by action-index tuples or, for
    symmetric rules, from ``counts`` keyed by count vectors (how many samples
    took each action).  Evaluation only ever needs the symmetrization of ``g``
    since the samples are i.i.d., so that is what gets precomputed.
    """

    def __init__(self, num_actions: int, sample_count: int, *, table=None, counts=None):
        if (table is None) == (counts is None):
            raise ProblemFormatError("give exactly one of table or counts")
        k, n = int(num_actions), int(sample_count)
        if n < 1:
            raise ProblemFormatError("a sampler needs at least one sample")
        if num_compositions(n, k) > ENUMERATION_CAP:
            raise CapExceeded(f"{num_compositions(n, k)} sample compositions exceed {ENUMERATION_CAP}")
        self.num_actions, self.sample_count = k, n
        self.symmetric = counts is not None
        self._rows = compositions(n, k)
        index = {tuple(r): i for i, r in enumerate(self._rows.tolist())}
        values = np.zeros((len(self._rows), k))
        if counts is not None:
            seen = np.zeros(len(self._rows), dtype=bool)
            for key, val in counts.items():
                key = tuple(int(c) for c in key)
                if key not in index:
                    raise ProblemFormatError(f"count vector {key} does not sum to {n}")
                values[index[key]] = as_policy(val, k)
                seen[index[key]] = True
            if not seen.all():
                raise ProblemFormatError("sampler count table is incomplete")
            self.table = None
        else:
            if k**n > ENUMERATION_CAP:
                raise CapExceeded(f"{k}^{n} sample tuples exceed {ENUMERATION_CAP}")
            full = {}
            hits = np.zeros(len(self._rows))
            for key, val in table.items():
                key = tuple(int(a) for a in key)
                if len(key) != n or not all(0 <= a < k for a in key):
                    raise ProblemFormatError(f"bad sample tuple {key}")
                v = as_policy(val, k)
                full[key] = v
                i = index[tuple(np.bincount(key, minlength=k).tolist())]
                values[i] += v
                hits[i] += 1
            if len(full) != k**n:
                raise ProblemFormatError("sampler table is incomplete")
            values /= hits[:, None]
            self.table = full
        self._values = values
        self._weights = multinomial_array(self._rows)
        self._index = index

    @classmethod
    def from_function(cls, num_actions: int, sample_count: int, fn: Callable[[tuple], Sequence[float]]):
        """Symmetric sampler from a function of the count vector."""
        rows = compositions(sample_count, num_actions)
        return cls(num_actions, sample_count, counts={tuple(r): fn(tuple(r)) for r in rows.tolist()})

    def value(self, actions: Sequence[int]) -> np.ndarray:
        """``g`` applied to a concrete tuple of sampled action indices."""
        actions = tuple(int(a) for a in actions)
        if self.table is not None:
            return self.table[actions]
        counts = tuple(np.bincount(actions, minlength=self.num_actions).tolist())
        return self._values[self._index[counts]]

    def count_value(self, counts) -> np.ndarray:
        """Symmetrized ``g`` at a count vector."""
        return self._values[self._index[tuple(int(c) for c in counts)]]

    def __call__(self, policy) -> np.ndarray:
        p = np.asarray(policy, dtype=float)
        probs = self._weights * np.prod(p ** self._rows, axis=1)
        return probs @ self._values

    def slot_mean(self, action: int, policy) -> np.ndarray:
        """Average over slots of ``E[g | A_k = action]`` with the rest i.i.d."""
        p = np.asarray(policy, dtype=float)
        k, n = self.num_actions, self.sample_count
        rest = compositions(n - 1, k)
        weights = multinomial_array(rest) * np.prod(p ** rest, axis=1)
        full = rest.copy()
        full[:, action] += 1
        idx = [self._index[tuple(r)] for r in full.tolist()]
        return weights @ self._values[idx]

    def with_ignored_slot(self) -> "SimulationFunction":
        """Equivalent sampler that draws one extra sample and ignores it."""
        k, n = self.num_actions, self.sample_count

        def padded(counts):
            c = np.array(counts)
            out = np.zeros(k)
            for b in range(k):
                if c[b]:
                    smaller = c.copy()
                    smaller[b] -= 1
                    out += c[b] / (n + 1) * self.count_value(smaller)
            return out

        return SimulationFunction.from_function(k, n + 1, padded)

    def to_spec(self, labels: Sequence[str]) -> dict:
        if self.table is not None:
            table = {",".join(labels[a] for a in key): v.tolist() for key, v in sorted(self.table.items())}
            return {"kind": "sampler", "n": self.sample_count, "table": table}
        counts = {",".join(map(str, r)): v.tolist() for r, v in zip(self._rows.tolist(), self._values)}
        return {"kind": "sampler", "n": self.sample_count, "counts": counts}


class Sampler(DependenceFunction):
    kind = "sampler"

    def __init__(self, sampler: SimulationFunction):
        super().__init__(sampler.num_actions)
        self.sampler = sampler

    def _raw(self, p):
        return self.sampler(p)

    def _delta(self, action, p):
        n = self.sampler.sample_count
        d = n * (self.sampler.slot_mean(action, p) - self.sampler(p))
        return d - d.mean()

    def is_identity(self):
        s = self.sampler
        return s.sample_count == 1 and np.array_equal(s._values, np.eye(self.num_actions)[[
            int(np.argmax(r)) for r in s._rows]])

    def to_spec(self, labels):
        return self.sampler.to_spec(labels)


# ---------------------------------------------------------------------------
# opaque and named closed-form maps


class BlackBox(DependenceFunction):
    """Opaque evaluator; derivatives by finite differences when allowed."""

    kind = "blackbox"

    def __init__(self, num_actions: int, evaluator: Callable[[np.ndarray], Sequence[float]], differentiable: bool = True):
        super().__init__(num_actions)
        self.evaluator = evaluator
        self.differentiable = differentiable
        _check_maps_into_simplex(self._raw, self.num_actions)

    def _raw(self, p):
        return np.asarray(self.evaluator(p), dtype=float)

    def _delta(self, action, p):
        if not self.differentiable:
            raise NotDifferentiable()
        direction = vertex(self.num_actions, action) - p
        if not direction.any():
            return np.zeros(self.num_actions)
        h = FD_STEP
        forward = self._raw(p + h * direction)
        # moving backwards stays on the simplex while h <= p(a) / (1 - p(a))
        if p[action] >= h * (1.0 - p[action]):
            d = (forward - self._raw(p - h * direction)) / (2 * h)
        else:
            d = (forward - self._raw(p)) / h
        return d - d.mean()


def _sqrt_theodora(p):
    return math.sqrt(0.1 + 0.8 * p), 0.4 / math.sqrt(0.1 + 0.8 * p)


def _nrho(p):
    return 16 * p**4 / (1 + 16 * p**4), 64 * p**3 / (1 + 16 * p**4) ** 2


def _wine_step(p):
    return (1.0 if p > 0 else 0.0), None


def _staircase(p, n):
    return math.floor(n * p + 1e-12) / n, None


# name -> (first-component formula returning (value, derivative), differentiable)
BUILTINS = {
    "sqrt_theodora": (_sqrt_theodora, True),
    "nrho": (_nrho, True),
    "wine_step": (_wine_step, False),
    "staircase": (_staircase, False),
}


class Builtin(BlackBox):
    """Named two-action closed form ``F(pi)_1 = f(pi(a_1))``."""

    kind = "builtin"

    def __init__(self, name: str, params: Mapping | None = None):
        if name not in BUILTINS:
            raise ProblemFormatError(f"unknown builtin dependence {name!r}")
        formula, differentiable = BUILTINS[name]
        self.name, self.params = name, dict(params or {})
        self._formula = lambda p: formula(p, **self.params)
        super().__init__(2, self._evaluate, differentiable)

    def _evaluate(self, p):
        f = self._formula(float(p[0]))[0]
        return np.array([f, 1.0 - f])

    def _delta(self, action, p):
        if not self.differentiable:
            raise NotDifferentiable()
        slope = self._formula(float(p[0]))[1]
        # d p(a_1) along e_action - pi
        dp = (1.0 - p[0]) if action == 0 else -p[0]
        return np.array([slope * dp, -slope * dp])

    def to_spec(self, labels):
        spec = {"kind": "builtin", "name": self.name}
        if self.params:
            spec["params"] = dict(self.params)
        return spec


# ---------------------------------------------------------------------------
# spec dicts


def from_spec(spec: Mapping, labels: Sequence[str]) -> DependenceFunction:
    """Build a dependence function from its problem-file dict."""
    k = len(labels)
    try:
        kind = spec["kind"]
        if kind == "identity":
            return Identity(k)
        if kind == "constant":
            return Constant(as_policy(spec["policy"], k))
        if kind == "linear":
            return Linear(spec["columns"])
        if kind == "poly":
            return Polynomial(PolynomialMap([(t["exp"], t["coef"]) for t in spec["terms"]], k))
        if kind == "sampler":
            n = int(spec["n"])
            if "counts" in spec:
                counts = {tuple(int(c) for c in key.split(",")): v for key, v in spec["counts"].items()}
                return Sampler(SimulationFunction(k, n, counts=counts))
            position = {label: i for i, label in enumerate(labels)}
            table = {tuple(position[x] for x in key.split(",")): v for key, v in spec["table"].items()}
            return Sampler(SimulationFunction(k, n, table=table))
        if kind == "builtin":
            if k != 2:
                raise ProblemFormatError("builtin dependences are defined for two actions")
            return Builtin(spec["name"], spec.get("params"))
    except (KeyError, TypeError, ValueError, InvalidPolicy) as exc:
        if isinstance(exc, ProblemFormatError):
            raise
        raise ProblemFormatError(f"bad dependence spec {dict(spec)!r}: {exc}") from exc
    raise ProblemFormatError(f"unknown dependence kind {kind!r}")


# ---------------------------------------------------------------------------
# polynomial algebra


def as_polynomial(F) -> PolynomialMap | None:
    """Polynomial form of ``F`` when it has one, else None."""
    if isinstance(F, PolynomialMap):
        return F
    if isinstance(F, Polynomial):
        return F.poly
    if isinstance(F, Identity):
        return PolynomialMap.identity(F.num_actions)
    if isinstance(F, Constant):
        return PolynomialMap.constant(F.value)
    if isinstance(F, Linear):
        k = F.num_actions
        return PolynomialMap({tuple(np.eye(k, dtype=int)[a]): F.columns[a] for a in range(k)})
    if isinstance(F, Sampler):
        return from_sampler(F.sampler)
    return None


def homogenize(poly: PolynomialMap, degree: int) -> PolynomialMap:
    """Multiply each term by ``(sum_a pi(a))**(degree - its degree)``."""
    if degree < poly.degree:
        raise ValueError(f"cannot homogenize degree-{poly.degree} polynomial to degree {degree}")
    k = poly.num_actions
    out: dict[tuple, np.ndarray] = {}
    for exp, coef in poly.terms.items():
        gap = degree - sum(exp)
        pads = compositions(gap, k)
        weights = multinomial_array(pads)
        base = np.array(exp)
        for pad, w in zip(pads, weights):
            key = tuple((base + pad).tolist())
            out[key] = out.get(key, 0.0) + w * coef
    return PolynomialMap(out, k)


def nonneg_rewrite(poly: PolynomialMap, max_degree: int | None = None) -> PolynomialMap:
    """Lowest-degree homogeneous form with all coefficients nonnegative.

    Tries degrees ``deg, deg + 1, ...`` up to ``max_degree`` (default
    ``max(3 * deg, 60)``); entries above ``-1e-12`` are clamped to zero.
    """
    d = poly.degree
    cap = max(3 * d, 60) if max_degree is None else max_degree
    for degree in range(d, cap + 1):
        form = homogenize(poly, degree)
        if form.min_coefficient() >= -CLAMP_TOL:
            return PolynomialMap({e: np.maximum(c, 0.0) for e, c in form.terms.items()}, poly.num_actions)
    raise RewriteFailed(f"no nonnegative representation up to degree {cap}")


def to_sampler(poly: PolynomialMap) -> SimulationFunction:
    """Symmetric sampler whose expectation is the homogeneous ``poly``."""
    if not poly.is_homogeneous():
        raise ValueError("polynomial must be homogeneous")
    if poly.min_coefficient() < 0:
        raise ValueError("polynomial must have nonnegative coefficients")
    n, k = poly.degree, poly.num_actions
    counts = {}
    for row in compositions(n, k).tolist():
        c = poly.coefficient(row)
        m = multinomial(row)
        if abs(c.sum() - m) > 1e-9:
            raise NotASimplexMap(f"coefficients at {tuple(row)} sum to {c.sum():.12g}, need {m}")
        counts[tuple(row)] = c / m
    return SimulationFunction(k, n, counts=counts)


def from_sampler(g: SimulationFunction) -> PolynomialMap:
    """Expand ``E[g(A_1..A_N)]`` into a homogeneous polynomial."""
    terms = {tuple(r): w * v for r, w, v in zip(g._rows.tolist(), g._weights, g._values)}
    return PolynomialMap(terms, g.num_actions)


@dataclass
class SampleabilityVerdict:
    sampleable: bool
    reason: str
    sampler: SimulationFunction | None = None
    notes: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.sampleable


def _univariate_components(poly: PolynomialMap) -> list[Poly1D]:
    """Components of a two-action polynomial as polynomials in ``p = pi(a_1)``."""
    p, q = Poly1D([0.0, 1.0]), Poly1D([1.0, -1.0])
    comps = []
    for i in range(2):
        total = Poly1D([0.0])
        for (e0, e1), c in poly.terms.items():
            total = total + c[i] * p**e0 * q**e1
        comps.append(total.trim(1e-14))
    return comps


def _edge_multiplicity(f: Poly1D, tol: float = 1e-10) -> int:
    coefs = f.coef
    m = 0
    while m < len(coefs) - 1 and abs(coefs[m]) <= tol:
        m += 1
    return m


def is_sampleable(F, sample_count: int) -> SampleabilityVerdict:
    """Whether ``F`` equals ``E[g(A_1..A_N)]`` for some ``g`` with ``N <= sample_count``."""
    poly = as_polynomial(F)
    if poly is None:
        return SampleabilityVerdict(False, "not polynomial")
    notes = []
    k = poly.num_actions
    if k == 2:
        grid = np.linspace(0.0, 1.0, 2001)
        for i, f in enumerate(_univariate_components(poly)):
            if np.allclose(f.coef, 0.0, atol=1e-12):
                continue
            left = _edge_multiplicity(f)
            right = _edge_multiplicity(f(Poly1D([1.0, -1.0])))
            rest, _ = divmod(f, Poly1D([0.0, 1.0]) ** left * Poly1D([1.0, -1.0]) ** right)
            if rest(grid).min() <= 1e-9:
                return SampleabilityVerdict(
                    False, f"component {i} has a zero away from the vertices that cannot be factored out", notes=notes
                )
            notes.append(f"component {i} = p^{left} (1-p)^{right} x positive")
    else:
        interior = simplex_grid(k, GRID_RESOLUTION)
        interior = interior[(interior > 0).all(axis=1)]
        if len(interior) and (np.array([poly(x) for x in interior]).min() <= 1e-12):
            notes.append("zero in the simplex interior: no finite sample count can work")
    if sample_count < poly.degree:
        return SampleabilityVerdict(False, f"degree {poly.degree} exceeds {sample_count} samples", notes=notes)
    try:
        form = nonneg_rewrite(poly, sample_count)
    except RewriteFailed:
        return SampleabilityVerdict(False, f"no nonnegative form up to degree {sample_count}", notes=notes)
    try:
        sampler = to_sampler(form)
    except NotASimplexMap as exc:
        return SampleabilityVerdict(False, str(exc), notes=notes)
    return SampleabilityVerdict(True, f"nonnegative at degree {form.degree}", sampler, notes)


@dataclass(frozen=True)
class ScanViolation:
    p: tuple
    q: tuple
    component: int
    ratio: float
    bound: float


def _scan_points(k: int, resolution: int) -> np.ndarray:
    """Lattice points plus points nudged a tiny step along every edge."""
    base = simplex_grid(k, resolution)
    pts = [base]
    for eps in (1e-2, 1e-4, 1e-6):
        for i in range(k):
            for j in range(k):
                if i != j:
                    moved = base + eps * (np.eye(k)[j] - np.eye(k)[i])
                    pts.append(moved[moved[:, i] >= 0])
    return np.unique(np.vstack(pts).round(15), axis=0)


def necessary_condition_scan(F, t: float, resolution: int = 20, max_samples: int = 20) -> list[ScanViolation]:
    """Search for pairs with ``p >= t q`` yet ``f_i(p) < t**max_samples f_i(q)``.

    Any ``N``-sample rule obeys ``f_i(p) >= t**N f_i(q)`` on such pairs, so a
    hit rules out every sample count up to ``max_samples``.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    k = F.num_actions
    pts = _scan_points(k, resolution)
    values = np.array([F(x) for x in pts])
    bound = t**max_samples
    found = []
    for pi, (p, fp) in enumerate(zip(pts, values)):
        dominated = np.all(p[None, :] >= t * pts - 1e-15, axis=1)
        for i in range(k):
            mask = dominated & (values[:, i] > 0) & (fp[i] < bound * values[:, i] * (1 - 1e-12))
            for qi in np.nonzero(mask)[0]:
                found.append(ScanViolation(tuple(p), tuple(pts[qi]), i, float(fp[i] / values[qi, i]), bound))
    return found


def bernstein_approx(F: DependenceFunction, sample_count: int) -> Sampler:
    """Sampler applying ``F`` to the empirical distribution of ``N`` samples."""
    k = F.num_actions
    if num_compositions(sample_count, k) > ENUMERATION_CAP:
        raise CapExceeded(f"{num_compositions(sample_count, k)} compositions exceed {ENUMERATION_CAP}")
    return Sampler(SimulationFunction.from_function(k, sample_count, lambda c: F(np.array(c) / sample_count)))


def sup_error(F: DependenceFunction, G: DependenceFunction, resolution: int = 50) -> float:
    """Largest coordinate gap between two maps on a simplex lattice."""
    return max(float(np.abs(F(x) - G(x)).max()) for x in simplex_grid(F.num_actions, resolution))
