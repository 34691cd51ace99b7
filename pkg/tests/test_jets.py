"""Jet arithmetic: oracles are a dict-based polynomial convolution and
central finite differences on closed-form functions."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavetrace.jets import (
    MultiJet,
    derivative_tensor,
    extract_partial,
    jet_add,
    jet_compose_scalar,
    jet_exp,
    jet_mul,
    jet_power,
    jet_reciprocal,
    jet_scale,
    jet_sqrt,
    sqrt_series,
)

# ---------------------------------------------------------------------------
# dict-based reference implementation (independent of the dense engine)


def dict_of(jet: MultiJet) -> dict:
    tab = jet._tab()
    return {
        tuple(int(t) for t in e): c
        for e, c in zip(tab.exponents, jet.coeffs)
        if c != 0
    }


def dict_mul(a: dict, b: dict, max_degree: int) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            if sum(e) <= max_degree:
                out[e] = out.get(e, 0.0) + ca * cb
    return out


def random_jet(rng, num_vars, max_degree, complex_=False):
    jet = MultiJet.zero(num_vars, max_degree, complex_=complex_)
    vals = rng.standard_normal(jet.coeffs.shape)
    if complex_:
        vals = vals + 1j * rng.standard_normal(jet.coeffs.shape)
    jet.coeffs[:] = vals
    return jet


# ---------------------------------------------------------------------------


def test_one_plus_x_times_one_minus_x():
    one_plus = MultiJet.from_terms({(0,): 1.0, (1,): 1.0}, 1, 2)
    one_minus = MultiJet.from_terms({(0,): 1.0, (1,): -1.0}, 1, 2)
    prod = jet_mul(one_plus, one_minus)
    assert prod.coefficient((0,)) == 1.0
    assert prod.coefficient((1,)) == 0.0
    assert prod.coefficient((2,)) == -1.0


def test_add_zero_is_identity():
    rng = np.random.default_rng(0)
    jet = random_jet(rng, 3, 4)
    zero = MultiJet.zero(3, 4)
    assert jet_add(jet, zero).allclose(jet)


def test_mul_against_dict_convolution():
    rng = np.random.default_rng(1)
    for n, d in [(1, 6), (2, 5), (3, 4), (4, 3)]:
        a = random_jet(rng, n, d)
        b = random_jet(rng, n, d)
        got = dict_of(jet_mul(a, b))
        want = dict_mul(dict_of(a), dict_of(b), d)
        keys = set(got) | set(want)
        for k in keys:
            assert math.isclose(
                got.get(k, 0.0), want.get(k, 0.0), rel_tol=1e-13, abs_tol=1e-13
            )


def test_mul_commutes_and_associates():
    rng = np.random.default_rng(2)
    a = random_jet(rng, 3, 5)
    b = random_jet(rng, 3, 5)
    c = random_jet(rng, 3, 5)
    assert jet_mul(a, b).allclose(jet_mul(b, a), rtol=1e-14, atol=1e-14)
    assert jet_mul(jet_mul(a, b), c).allclose(
        jet_mul(a, jet_mul(b, c)), rtol=1e-13, atol=1e-12
    )


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=3),
    st.integers(min_value=0, max_value=4),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_ring_axioms(n, d, seed):
    rng = np.random.default_rng(seed)
    a = random_jet(rng, n, d)
    b = random_jet(rng, n, d)
    c = random_jet(rng, n, d)
    # distributivity
    lhs = jet_mul(a, jet_add(b, c))
    rhs = jet_add(jet_mul(a, b), jet_mul(a, c))
    assert lhs.allclose(rhs, rtol=1e-13, atol=1e-13)
    # scalar compatibility
    assert jet_scale(jet_mul(a, b), 2.5).allclose(jet_mul(jet_scale(a, 2.5), b))


def test_shape_mismatch_errors():
    a = MultiJet.zero(2, 3)
    with pytest.raises(ValueError, match="mismatch"):
        jet_add(a, MultiJet.zero(2, 4))
    with pytest.raises(ValueError, match="mismatch"):
        jet_mul(a, MultiJet.zero(3, 3))


def test_extract_partial_factorial_convention():
    jet = MultiJet.from_terms({(2,): 1.0}, 1, 3)
    assert extract_partial(jet, (2,)) == 2.0
    with pytest.raises(ValueError):
        extract_partial(jet, (4,))


def test_mixed_partial_symmetry():
    rng = np.random.default_rng(3)
    jet = random_jet(rng, 3, 5)
    dxy = jet.diff(0).diff(1)
    dyx = jet.diff(1).diff(0)
    # derivatives lose top-degree information symmetrically
    assert np.allclose(dxy.coeffs, dyx.coeffs)


def test_leibniz_rule():
    rng = np.random.default_rng(4)
    f = random_jet(rng, 2, 5)
    g = random_jet(rng, 2, 5)
    lhs = jet_mul(f, g).diff(0)
    rhs = jet_add(jet_mul(f.diff(0), g), jet_mul(f, g.diff(0)))
    # product rule holds exactly below the truncation degree
    tab = lhs._tab()
    keep = tab.degrees < 5
    assert np.allclose(lhs.coeffs[keep], rhs.coeffs[keep], rtol=1e-13, atol=1e-12)


def test_sqrt_binomial_series():
    u = MultiJet.variable(0, 1, 4)  # u with zero constant term
    jet = jet_compose_scalar(sqrt_series(1.0, 5), u)
    # sqrt(1 + u) = 1 + u/2 - u^2/8 + u^3/16 - 5u^4/128
    want = [1.0, 0.5, -0.125, 1.0 / 16, -5.0 / 128]
    got = [jet.coefficient((k,)) for k in range(5)]
    assert np.allclose(got, want, rtol=1e-14)


def test_sqrt_rejects_nonpositive_point():
    u = MultiJet.variable(0, 1, 3)
    with pytest.raises(ValueError, match="positive"):
        jet_sqrt(u)  # constant term 0


def test_compose_exp_with_quadratic_jet():
    # g(x, y) = exp(0.3 + x + 0.5 y + 0.2 x^2 - 0.1 x y)
    inner = MultiJet.from_terms(
        {(0, 0): 0.3, (1, 0): 1.0, (0, 1): 0.5, (2, 0): 0.2, (1, 1): -0.1}, 2, 5
    )
    jet = jet_exp(inner)

    def g(x, y):
        return math.exp(0.3 + x + 0.5 * y + 0.2 * x * x - 0.1 * x * y)

    h = 1e-2
    # central 2nd mixed difference for d2g/dxdy
    fd = (g(h, h) - g(h, -h) - g(-h, h) + g(-h, -h)) / (4 * h * h)
    assert math.isclose(extract_partial(jet, (1, 1)), fd, rel_tol=1e-4)
    # exact third partials via analytic chain rule spot check
    fd3 = (
        g(2 * h, h) - 2 * g(h, h) + 2 * g(-h, h) - g(-2 * h, h)
        - (g(2 * h, -h) - 2 * g(h, -h) + 2 * g(-h, -h) - g(-2 * h, -h))
    ) / (4 * h**3 * h)
    assert math.isclose(extract_partial(jet, (3, 1)), fd3, rel_tol=1e-12, abs_tol=5e-3 * abs(fd3))


def chord(x1, x2, f, g):
    return math.sqrt((x1 - x2) ** 2 + (f(x1) - g(x2)) ** 2)


def test_chord_length_jet_matches_finite_differences():
    # random polynomial arcs with separated values (chord stays positive)
    rng = np.random.default_rng(5)
    fc = np.concatenate(([1.0, 0.0], 0.2 * rng.standard_normal(4)))
    gc = np.concatenate(([-1.0, 0.0], 0.2 * rng.standard_normal(4)))

    def f(x):
        return sum(c * x**k for k, c in enumerate(fc))

    def g(x):
        return sum(c * x**k for k, c in enumerate(gc))

    d = 5
    x1 = MultiJet.from_univariate(fc, 0, 2, d)
    x2 = MultiJet.from_univariate(gc, 1, 2, d)
    dx = MultiJet.variable(0, 2, d) - MultiJet.variable(1, 2, d)
    dy = x1 - x2
    c2 = jet_mul(dx, dx) + jet_mul(dy, dy)
    cjet = jet_sqrt(c2)

    h = 1e-2
    for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (2, 1), (3, 2), (0, 5)]:
        # tensor-product central differences
        grid_a = [-2, -1, 0, 1, 2]
        weights = {
            0: {0: [1.0]},
        }

        def fd_1d(vals, h):
            # 5-point central first/second derivative helpers
            return vals

        # build FD by nested application of first-derivative stencils
        def partial(fun, orders, h):
            if orders == (0, 0):
                return fun(0.0, 0.0)

            def d1(fn, axis):
                def out(*p):
                    q = list(p)

                    def at(t):
                        q2 = list(p)
                        q2[axis] += t
                        return fn(*q2)

                    return (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h)

                return out

            fn = fun
            for axis, o in enumerate(orders):
                for _ in range(o):
                    fn = d1(fn, axis)
            return fn(0.0, 0.0)

        want = partial(lambda u, v: chord(u, v, f, g), alpha, h)
        got = extract_partial(cjet, alpha)
        assert math.isclose(got, want, rel_tol=2e-6, abs_tol=2e-6)


def test_chain_rule_against_reciprocal():
    # 1/(2 + x + y^2) has an elementary expansion; verify against compose
    inner = MultiJet.from_terms({(0, 0): 2.0, (1, 0): 1.0, (0, 2): 1.0}, 2, 4)
    jet = jet_reciprocal(inner)

    def f(x, y):
        return 1.0 / (2.0 + x + y * y)

    h = 1e-2
    val = (f(h, 0) - f(-h, 0)) / (2 * h)
    assert math.isclose(extract_partial(jet, (1, 0)), val, rel_tol=1e-4)
    assert math.isclose(jet.value, 0.5, rel_tol=1e-15)


def test_power_composition_matches_sqrt():
    rng = np.random.default_rng(6)
    base = random_jet(rng, 2, 4)
    base.coeffs[0] = 3.0
    assert jet_power(base, 0.5).allclose(jet_sqrt(base), rtol=1e-12, atol=1e-12)


def test_truncate_extend_roundtrip():
    rng = np.random.default_rng(7)
    jet = random_jet(rng, 3, 4)
    up = jet.extended(7)
    assert up.max_degree == 7
    assert up.truncated(4).allclose(jet)
    # extension preserves every original coefficient
    for alpha in [(0, 0, 0), (1, 2, 1), (4, 0, 0)]:
        assert up.coefficient(alpha) == jet.coefficient(alpha)


def test_derivative_tensor_symmetry_and_values():
    rng = np.random.default_rng(8)
    jet = random_jet(rng, 3, 4)
    t3 = derivative_tensor(jet, 3)
    assert t3.shape == (3, 3, 3)
    for perm in itertools.permutations(range(3)):
        assert np.allclose(t3, np.transpose(t3, perm))
    assert math.isclose(t3[0, 1, 2], extract_partial(jet, (1, 1, 1)), rel_tol=1e-14)
    assert math.isclose(t3[0, 0, 1], extract_partial(jet, (2, 1, 0)), rel_tol=1e-14)
    with pytest.raises(ValueError, match="order"):
        derivative_tensor(jet, 5)


def test_complex_jets():
    rng = np.random.default_rng(9)
    a = random_jet(rng, 2, 3, complex_=True)
    b = random_jet(rng, 2, 3, complex_=True)
    got = dict_of(jet_mul(a, b))
    want = dict_mul(dict_of(a), dict_of(b), 3)
    for k in set(got) | set(want):
        assert abs(got.get(k, 0.0) - want.get(k, 0.0)) < 1e-12
