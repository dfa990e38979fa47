import math
from functools import lru_cache

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from hermion.hermite_basis import (GridField, HermiteField, UnderResolvedGrid, analyze, collocation_matrices,
                                   evaluate, gauss_hermite_grid, gauss_hermite_rule, hermite_1d, hermite_functions,
                                   hermite_nd, synthesize, uniform_grid)
from hermion.oracles import gaussian_moment

X = sympy.Symbol("x")


@lru_cache(maxsize=None)
def rodrigues_poly(k: int) -> sympy.Poly:
    """H_k from (-1)^k e^{x^2} d^k/dx^k e^{-x^2}: each derivative maps p e^{-x^2} to (p' - 2 x p) e^{-x^2}."""
    p = sympy.Poly(1, X)
    for _ in range(k):
        p = p.diff(X) - sympy.Poly(2 * X, X) * p
    return p * (-1) ** k


def rodrigues_value(k: int, x: float) -> float:
    with mpmath.workdps(60):
        xm = mpmath.mpf(x)
        hk = sum(mpmath.mpf(int(c)) * xm ** i for (i,), c in rodrigues_poly(k).terms())
        norm = mpmath.sqrt(mpmath.sqrt(mpmath.pi) * mpmath.mpf(2) ** k * mpmath.factorial(k))
        return float(hk * mpmath.exp(-xm * xm / 2) / norm)


def test_ground_state_at_origin():
    assert hermite_1d(0, 0.0) == pytest.approx(math.pi ** -0.25, rel=1e-15)
    assert hermite_1d(0, 0.0) == pytest.approx(0.75112554, abs=1e-8)


def test_odd_mode_vanishes_at_origin():
    assert hermite_1d(1, 0.0) == 0.0


def test_second_mode_matches_rodrigues_at_origin():
    expected = (math.sqrt(math.pi) * 4 * 2) ** -0.5 * (-2.0)
    assert hermite_1d(2, 0.0) == pytest.approx(expected, rel=1e-14)
    assert hermite_1d(2, 0.0) == pytest.approx(rodrigues_value(2, 0.0), rel=1e-14)


def test_recurrence_agrees_with_rodrigues():
    xs = np.linspace(-10, 10, 41)
    vals = hermite_functions(51, xs)
    worst = 0.0
    for k in range(51):
        ref = np.array([rodrigues_value(k, x) for x in xs])
        roots = np.polynomial.hermite.hermroots(np.eye(k + 1)[k]) if k else np.array([np.inf])
        # relative error is ill-conditioned next to a zero, so skip points within 0.01 of one
        mask = np.abs(xs[:, None] - roots[None, :]).min(axis=1) > 1e-2
        worst = max(worst, float(np.max(np.abs(vals[k][mask] - ref[mask]) / np.abs(ref[mask]))))
    assert worst <= 1e-12


def test_nd_products():
    assert hermite_nd((0, 0), (0.0, 0.0)) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert hermite_nd((1, 0), (0.0, 3.7)) == 0.0
    assert hermite_nd((2, 2), (1.0, 1.0)) == pytest.approx(hermite_1d(2, 1.0) ** 2, rel=1e-15)


def test_nd_dimension_mismatch():
    with pytest.raises(ValueError):
        hermite_nd((1, 2), (0.0,))


def test_single_point_rule():
    r = gauss_hermite_rule(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights[0] == pytest.approx(math.sqrt(math.pi), rel=1e-15)


def test_two_point_rule():
    # roots of H_2 = 4x^2 - 2 and moment matching give +-1/sqrt2 with weights sqrt(pi)/2
    roots = sorted(float(v) for v in sympy.solve(rodrigues_poly(2).as_expr(), X))
    r = gauss_hermite_rule(2)
    assert np.allclose(r.nodes, roots, rtol=0, atol=1e-15)
    assert np.allclose(r.weights, math.sqrt(math.pi) / 2, rtol=1e-14)
    assert r.weights.sum() == pytest.approx(gaussian_moment(0), rel=1e-14)
    assert np.sum(r.weights * r.nodes ** 2) == pytest.approx(gaussian_moment(2), rel=1e-14)


@pytest.mark.parametrize("m", [1, 3, 8, 20, 40])
def test_polynomial_exactness(m):
    r = gauss_hermite_rule(m)
    for j in range(2 * m):
        exact = gaussian_moment(j)
        # scale by the moment of |x|^j so odd moments get a meaningful tolerance
        scale = math.gamma((j + 1) / 2)
        assert abs(np.sum(r.weights * r.nodes ** j) - exact) <= 1e-12 * scale


@given(st.integers(min_value=1, max_value=200))
@settings(max_examples=25, deadline=None)
def test_weights_sum_and_order(m):
    r = gauss_hermite_rule(m)
    assert r.weights.sum() == pytest.approx(math.sqrt(math.pi), rel=1e-13)
    assert np.all(np.diff(r.nodes) > 0)
    assert np.all(r.weights > 0)


@pytest.mark.parametrize("n,d", [(8, 1), (32, 1), (8, 2), (32, 2)])
def test_orthonormality(n, d):
    rules = gauss_hermite_grid(2 * n, d)
    eye = np.eye(n)
    for k in range(d):
        r = rules[k]
        h = hermite_functions(n, r.nodes)
        gram = (h * r.dx_weights) @ h.T
        assert np.abs(gram - eye).max() <= 1e-8
    if d == 2:
        idx = [(a, b) for a in range(0, n, 5) for b in range(0, n, 7)]
        vals = np.stack([synthesize(HermiteField.basis(a, n), rules).values for a in idx])
        w = rules[0].dx_weights[:, None] * rules[1].dx_weights[None, :]
        gram = np.einsum("ixy,jxy->ij", vals, vals * w)
        assert np.abs(gram - np.eye(len(idx))).max() <= 1e-8


def test_analyze_basis_fields():
    rules = gauss_hermite_grid(16)
    x = rules[0].nodes
    u = GridField(math.pi ** -0.25 * np.exp(-x * x / 2), rules)
    c = analyze(u, 8).coeffs
    assert abs(c[0] - 1) < 1e-13 and np.abs(c[1:]).max() < 1e-13
    u2 = GridField((hermite_1d(0, x) + hermite_1d(1, x)) / math.sqrt(2), rules)
    c2 = analyze(u2, 8).coeffs
    assert np.allclose(c2[:2], 1 / math.sqrt(2), atol=1e-13) and np.abs(c2[2:]).max() < 1e-13


def test_round_trip_random_eight_modes():
    f = HermiteField.random(8, 1, rng=3)
    back = analyze(synthesize(f, gauss_hermite_grid(16)), 8)
    assert np.linalg.norm(back.coeffs - f.coeffs) / f.l2_norm() < 1e-10


@given(st.integers(1, 12), st.integers(1, 2), st.integers(0, 2 ** 31))
@settings(max_examples=30, deadline=None)
def test_round_trip_property(n, d, seed):
    f = HermiteField.random(n, d, rng=seed)
    back = analyze(synthesize(f, gauss_hermite_grid(n + 1, d)), n)
    assert np.linalg.norm(back.coeffs - f.coeffs) <= 1e-10 * f.l2_norm()


def test_under_resolved_grid_rejected():
    u = synthesize(HermiteField.random(8, 1, rng=0), gauss_hermite_grid(8))
    with pytest.raises(UnderResolvedGrid):
        analyze(u, 8)


def test_synthesize_basics():
    rules = gauss_hermite_grid(12)
    u = synthesize(HermiteField.basis(0, 4), rules)
    assert np.allclose(u.values, hermite_1d(0, rules[0].nodes), atol=1e-16)
    assert np.all(synthesize(HermiteField.zeros(4), rules).values == 0)
    with pytest.raises(ValueError):
        synthesize(HermiteField.zeros(4, 2), rules)


def test_parseval_on_random_field():
    f = HermiteField.random(8, 1, rng=11, norm=2.5)
    u = synthesize(f, gauss_hermite_grid(16))
    assert u.l2_norm() == pytest.approx(f.l2_norm(), rel=1e-10)


def test_zero_field_norm():
    assert HermiteField.zeros(5, 2).l2_norm() == 0.0


def test_collocation_is_orthogonal():
    s, a = collocation_matrices(40)
    w = gauss_hermite_rule(40).dx_weights
    q = np.sqrt(w)[:, None] * s
    assert np.abs(q.T @ q - np.eye(40)).max() < 1e-12
    assert np.abs(a @ s - np.eye(40)).max() < 1e-12


def test_uniform_grid_sampling_matches_evaluate():
    f = HermiteField.random(6, 1, rng=5)
    rules = uniform_grid(10.0, 200)
    assert np.allclose(synthesize(f, rules).values, evaluate(f, [rules[0].nodes]), atol=1e-15)
