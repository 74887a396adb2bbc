"""Helpers for points on the probability simplex and lattice enumeration."""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np

from .errors import InvalidPolicy

#: Slack within which a vector is snapped back onto the simplex.
RENORMALIZE_TOL = 1e-9


def as_policy(values, num_actions: int | None = None, tol: float = RENORMALIZE_TOL) -> np.ndarray:
    """Return ``values`` as a float array on the simplex.

    Vectors within ``tol`` of the simplex (small negative entries, sum off by
    at most ``tol``) are clipped and renormalized; anything else raises
    :class:`InvalidPolicy`.
    """
    p = np.array(values, dtype=float).ravel()
    if num_actions is not None and p.size != num_actions:
        raise InvalidPolicy(f"policy has {p.size} entries, expected {num_actions}")
    if p.size == 0 or not np.all(np.isfinite(p)):
        raise InvalidPolicy(f"not a probability vector: {values!r}")
    if p.min() < -tol or abs(p.sum() - 1.0) > tol:
        raise InvalidPolicy(f"not on the simplex within {tol:g}: {p.tolist()}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def vertex(k: int, a: int) -> np.ndarray:
    e = np.zeros(k)
    e[a] = 1.0
    return e


def vertex_index(policy: np.ndarray, tol: float = 1e-12) -> int | None:
    """Index of the action played with certainty, or None for mixed policies."""
    a = int(np.argmax(policy))
    return a if policy[a] >= 1.0 - tol else None


@lru_cache(maxsize=256)
def compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``.

    Rows come out in reverse lexicographic order, so ``(total, 0, ..)`` first.
    """
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total, -1, -1):
        rest = compositions(total - first, parts - 1)
        rows.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    out = np.vstack(rows)
    out.setflags(write=False)
    return out


def num_compositions(total: int, parts: int) -> int:
    return comb(total + parts - 1, parts - 1)


def multinomial(counts) -> int:
    counts = [int(c) for c in counts]
    return factorial(sum(counts)) // prod(factorial(c) for c in counts)


def multinomial_array(rows: np.ndarray) -> np.ndarray:
    return np.array([multinomial(r) for r in rows], dtype=float)


def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """Lattice points of the simplex with spacing ``1/resolution``."""
    return compositions(resolution, k) / resolution


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def random_policy(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform draw from the simplex."""
    return rng.dirichlet(np.ones(k))


def action_tuples(k: int, n: int):
    return itertools.product(range(k), repeat=n)
