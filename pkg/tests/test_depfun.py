import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newcomblike import fixtures
from newcomblike.depfun import (
    BlackBox,
    Builtin,
    Constant,
    Identity,
    Linear,
    Polynomial,
    PolynomialMap,
    Sampler,
    SimulationFunction,
    bernstein_approx,
    from_sampler,
    from_spec,
    homogenize,
    is_sampleable,
    necessary_condition_scan,
    nonneg_rewrite,
    sup_error,
    to_sampler,
)
from newcomblike.errors import InvalidPolicy, NotASimplexMap, NotDifferentiable, RangeViolation, RewriteFailed
from newcomblike.simplex import simplex_grid


def two_action_poly(first):
    """Two-action map from the coefficients of its first component in p (lowest power first)."""
    terms = {(0, 0): [first[0], 1.0 - first[0]]}
    for d, c in enumerate(first[1:], start=1):
        terms[(d, 0)] = [c, -c]
    return PolynomialMap(terms, 2)


def test_theodora_map_values():
    F = Polynomial(fixtures.theodora_cubic())
    np.testing.assert_allclose(F([1, 0]), [5 / 6, 1 / 6], atol=1e-15)
    np.testing.assert_allclose(F([0, 1]), [1 / 6, 5 / 6], atol=1e-15)


def test_identity_and_majority_sampler():
    rng = np.random.default_rng(0)
    x = rng.dirichlet(np.ones(3))
    np.testing.assert_allclose(Identity(3)(x), x, atol=1e-15)
    g = fixtures.majority_sampler()
    # all 8 tuples, each with probability 1/8: symmetry forces 1/2
    by_hand = np.mean([g.value(t) for t in itertools.product(range(2), repeat=3)], axis=0)
    np.testing.assert_allclose(by_hand, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(Sampler(g)([0.5, 0.5]), [0.5, 0.5], atol=1e-15)


def test_nrho_derivative_at_half():
    F = Builtin("nrho")
    d = F.delta(1, [0.5, 0.5])
    # F'(1/2) = 2 and the direction e_D - pi moves p by -1/2
    np.testing.assert_allclose(d, [-1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(F.delta(0, [0.5, 0.5]), [1.0, -1.0], atol=1e-12)


def test_constant_has_zero_delta():
    F = Constant([0.2, 0.3, 0.5])
    for a in range(3):
        np.testing.assert_array_equal(F.delta(a, [0.1, 0.6, 0.3]), 0.0)


def test_sqrt_theodora_delta_at_pure_c():
    F = Builtin("sqrt_theodora")
    d = F.delta(1, [1.0, 0.0])
    np.testing.assert_allclose(d, [-0.4 / np.sqrt(0.9), 0.4 / np.sqrt(0.9)], atol=1e-12)


def test_step_functions_refuse_derivatives():
    with pytest.raises(NotDifferentiable, match="derivative unavailable"):
        Builtin("wine_step").delta(0, [0.5, 0.5])
    with pytest.raises(NotDifferentiable):
        Builtin("staircase", {"n": 4}).deltas([0.3, 0.7])


def test_maps_leaving_the_simplex_are_rejected():
    with pytest.raises(InvalidPolicy):
        Linear([[1.2, -0.2], [0.0, 1.0]])
    with pytest.raises(RangeViolation):
        BlackBox(2, lambda p: [2 * p[0] - 0.5, 1.5 - 2 * p[0]])


def test_homogenize_theodora_to_degree_three():
    form = homogenize(fixtures.theodora_cubic(), 3)
    got = [form.coefficient(e)[0] for e in ((0, 3), (1, 2), (2, 1), (3, 0))]
    np.testing.assert_allclose(got, [1 / 6, 1 / 2, 5 / 2, 5 / 6], atol=1e-12)


def test_homogenize_constant_one():
    form = homogenize(PolynomialMap.constant([1.0, 0.0]), 2)
    assert {e: c[0] for e, c in form.terms.items()} == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.integers(0, 3))
@settings(max_examples=40, deadline=None)
def test_homogenize_preserves_values(coefs, extra):
    poly = PolynomialMap({(d, 0): [c, -c] for d, c in enumerate(coefs)} | {(0, 0): [coefs[0], 1 - coefs[0]]}, 2)
    form = homogenize(poly, poly.degree + extra)
    for x in simplex_grid(2, 20):
        np.testing.assert_allclose(form(x), poly(x), atol=1e-12)


def test_nonneg_rewrite_theodora_at_degree_three():
    form = nonneg_rewrite(fixtures.theodora_cubic())
    assert form.degree == 3
    assert form.min_coefficient() >= 0


def test_nonneg_rewrite_fails_for_interior_zero():
    bump = two_action_poly([0.0, 4.0, -4.0])  # first component 4p(1 - p)
    with pytest.raises(RewriteFailed):
        nonneg_rewrite(bump, 40)


def test_nonneg_rewrite_fixed_point():
    poly = homogenize(PolynomialMap.identity(2), 2)
    assert nonneg_rewrite(poly).allclose(poly, atol=0)


def test_to_sampler_gives_majority_rule():
    g = to_sampler(nonneg_rewrite(fixtures.theodora_cubic()))
    assert g.sample_count == 3
    for t in itertools.product(range(2), repeat=3):
        want = [5 / 6, 1 / 6] if t.count(0) >= 2 else [1 / 6, 5 / 6]
        np.testing.assert_allclose(g.value(t), want, atol=1e-12)


def test_identity_round_trips_through_one_sample():
    g = to_sampler(PolynomialMap.identity(3))
    assert g.sample_count == 1
    for a in range(3):
        np.testing.assert_array_equal(g.value((a,)), np.eye(3)[a])
    assert from_sampler(g).allclose(PolynomialMap.identity(3))


def test_to_sampler_rejects_non_simplex_coefficients():
    bad = PolynomialMap({(1, 0): [0.5, 0.0], (0, 1): [0.0, 1.0]}, 2)
    with pytest.raises(NotASimplexMap):
        to_sampler(bad)


def test_from_sampler_majority():
    poly = from_sampler(fixtures.majority_sampler())
    for p in np.linspace(0, 1, 11):
        assert poly([p, 1 - p])[0] == pytest.approx(1 / 6 + 2 * p**2 - 4 / 3 * p**3, abs=1e-12)


def test_from_sampler_constant():
    g = SimulationFunction.from_function(3, 2, lambda c: [0.2, 0.3, 0.5])
    poly = from_sampler(g)
    for x in simplex_grid(3, 10):
        np.testing.assert_allclose(poly(x), [0.2, 0.3, 0.5], atol=1e-12)


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_sampler_polynomial_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    g = SimulationFunction.from_function(3, n, lambda c: rng.dirichlet(np.ones(3)))
    poly = from_sampler(g)
    assert poly.min_coefficient() >= 0
    back = from_sampler(to_sampler(poly))
    assert back.allclose(poly, atol=1e-10)


def test_sampleability_verdicts():
    assert is_sampleable(Polynomial(fixtures.theodora_cubic()), 3)
    assert not is_sampleable(Polynomial(fixtures.theodora_cubic()), 2)
    bump = Polynomial(two_action_poly([0.0, 4.0, -4.0]))
    for n in (2, 10, 40):
        assert not is_sampleable(bump, n)
    verdict = is_sampleable(Builtin("sqrt_theodora"), 60)
    assert not verdict and verdict.reason == "not polynomial"


def test_edge_zeros_can_be_factored():
    # p^2 (1 - p) (1 + p) stays in [0, 1] and is a sampler once p^2 (1 - p) is split off
    F = Polynomial(two_action_poly([0.0, 0.0, 1.0, 0.0, -1.0]))
    verdict = is_sampleable(F, 60)
    assert verdict
    for x in simplex_grid(2, 20):
        np.testing.assert_allclose(Sampler(verdict.sampler)(x), F(x), atol=1e-12)


def test_scan_finds_the_three_action_counterexample():
    F = Polynomial(fixtures.k3_polynomial())
    hits = necessary_condition_scan(F, 1 / 3)
    assert hits
    assert any(h.component == 0 and h.q[0] == 0.0 and h.p[0] == pytest.approx(0.5) for h in hits)


def test_scan_is_clean_for_identity_and_sampleable_maps():
    assert necessary_condition_scan(Identity(3), 0.5) == []
    assert necessary_condition_scan(Polynomial(fixtures.theodora_cubic()), 0.5, resolution=50, max_samples=3) == []


def test_bernstein_convergence_for_sqrt_map():
    F = Builtin("sqrt_theodora")
    errs = [sup_error(F, bernstein_approx(F, n)) for n in (2, 4, 8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errs[2:], errs[3:]))
    assert errs[-1] < 0.002


def test_bernstein_reproduces_linear_and_constant_maps():
    for F in (Linear([[0.9, 0.1], [0.2, 0.8]]), Constant([0.3, 0.7])):
        for n in (1, 3, 7):
            assert sup_error(F, bernstein_approx(F, n)) < 1e-12


@pytest.mark.parametrize("name", fixtures.DIFFERENTIABLE)
def test_deltas_sum_to_zero_and_match_finite_differences(problems, name):
    problem = problems[name]
    for F in problem.dependence:
        for x in fixtures.random_policies(problem.num_actions, 10, seed=5):
            d = F.deltas(x)
            np.testing.assert_allclose(d.sum(axis=1), 0.0, atol=1e-12)
            if isinstance(F, (Polynomial, Sampler, Linear, Identity)):
                h = 1e-6
                for a in range(problem.num_actions):
                    direction = np.eye(problem.num_actions)[a] - x
                    fd = (F(x + h * direction) - F(x - h * direction)) / (2 * h)
                    np.testing.assert_allclose(d[a], fd, atol=1e-7)


def test_sampler_matches_monte_carlo_draws():
    g = fixtures.offer_sampler()
    p = np.array([0.5, 0.3, 0.2])
    rng = np.random.default_rng(7)
    draws = rng.choice(3, size=(100_000, g.sample_count), p=p)
    counts = np.stack([(draws == a).sum(axis=1) for a in range(3)], axis=1)
    uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
    outputs = np.array([g.count_value(c) for c in uniq])[inverse.ravel()]
    mean, se = outputs.mean(axis=0), outputs.std(axis=0, ddof=1) / np.sqrt(len(outputs))
    z = np.abs(mean - g(p)) / np.where(se > 0, se, 1.0)
    assert np.all(z <= 4)


def test_spec_round_trip_for_every_kind():
    labels = ("a", "b")
    maps = [Identity(2), Constant([0.25, 0.75]), Linear([[0.9, 0.1], [0.1, 0.9]]), Polynomial(fixtures.theodora_cubic()),
            Sampler(fixtures.majority_sampler()), Builtin("staircase", {"n": 3})]
    for F in maps:
        G = from_spec(F.to_spec(labels), labels)
        for x in simplex_grid(2, 20):
            np.testing.assert_allclose(G(x), F(x), atol=1e-15)
