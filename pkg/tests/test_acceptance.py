"""Acceptance gate: the ten headline properties, one test each, in order.

Each test pins the tolerances it must meet; the timed ones assert their
own runtime budgets.  Run with ``pytest tests/test_acceptance.py -v`` to
get one pass/fail line per property.
"""

from __future__ import annotations

import dataclasses
import math
import time

import numpy as np
import pytest

from conftest import (
    EXCEPTIONAL_FLOQUET,
    random_dihedral_spec,
    random_mirror_spec,
    random_sp_problem,
)
from wavetrace.billiard import find_orbit, poincare_numeric, snell_residual
from wavetrace.domain import BoundaryArc, DomainSpec, ObstructionError, kt_parameters
from wavetrace.feynman import (
    FeynmanGraph,
    SPProblem,
    full_expansion,
    max_derivative_report,
    oscillatory_quadrature,
    sp_coefficient_diagrams,
    sp_coefficient_direct,
)
from wavetrace.hessian import (
    CirculantHessian,
    bad_set,
    badset_report,
    cubic_sum,
    decoupling_pair,
    determinant_closed_form,
    hessian_matrix,
    inverse_fourier,
    inverse_matrix,
    row_sum,
)
from wavetrace.invariants import (
    contributing_graphs,
    forward_table,
    invariant_full,
    invariant_top,
    principal_shift_factory,
)
from wavetrace.inverse import convex_representative, recover, recover_symmetric
from wavetrace.jets import MultiJet, extract_partial


def _h(r, a, L=1.0, b=None):
    return CirculantHessian(r=r, L=L, a=a, b=a if b is None else b)


def _shift(spec, which, k, delta):
    arc = spec.f if which == "top" else spec.f_minus
    shifted = arc.with_derivative(k, arc.derivative(k) + delta)
    return dataclasses.replace(spec, **{("f" if which == "top" else "f_minus"): shifted})


def _centered(fn, spec, which, k, delta=1e-3):
    return (fn(_shift(spec, which, k, delta)) - fn(_shift(spec, which, k, -delta))) / (
        2.0 * delta
    )


# 1 -------------------------------------------------------------------------


def test_circulant_inverse_routes_agree_through_r25():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    L = 1.3
    for r in range(1, 26):
        drawn = 0
        while drawn < 50:
            a = float(rng.uniform(-5.0, 5.0))
            h = _h(r, a, L=L)
            mat = hessian_matrix(h)
            symbol_min = float(np.abs(L * np.linalg.eigvalsh(mat)).min())
            if symbol_min <= 1e-6:
                continue
            drawn += 1
            fourier = inverse_matrix(h, method="fourier")
            cheb = inverse_matrix(h, method="chebyshev")
            dense = np.linalg.inv(mat)
            bound = 1e-9 * L / symbol_min  # 1e-9 x spectral norm of the inverse
            assert np.abs(fourier - cheb).max() <= bound
            assert np.abs(fourier - dense).max() <= bound
    assert time.perf_counter() - start < 10.0


# 2 -------------------------------------------------------------------------


def test_closed_form_inverse_displays():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = float(rng.uniform(2.2, 6.0) * rng.choice([-1.0, 1.0]))
        L = float(rng.uniform(0.5, 3.0))
        # two-bounce inverse: -L/(a^2-4) [[a, -2], [-2, a]]
        h2 = inverse_matrix(_h(1, a, L=L), method="fourier")
        want2 = -L / (a * a - 4.0) * np.array([[a, -2.0], [-2.0, a]])
        assert np.abs(h2 - want2).max() <= 1e-12 * np.abs(want2).max()
        # four-bounce inverse, first row: -L/(a^4-4a^2) (a^3-2a, -a^2, 2a, -a^2)
        row = np.array([inverse_fourier(_h(2, a, L=L), 1, q) for q in (1, 2, 3, 4)])
        want4 = -L / (a**4 - 4 * a**2) * np.array(
            [a**3 - 2.0 * a, -(a**2), 2.0 * a, -(a**2)]
        )
        assert np.abs(row - want4).max() <= 1e-12 * np.abs(want4).max()

    for r in (1, 2, 3, 5, 8):
        for a in (2.7, -3.3, 4.1):
            L = 1.7
            h = _h(r, a, L=L)
            # each inverse row sums to -L/(a+2)
            assert row_sum(h) == pytest.approx(-L / (a + 2.0), abs=1e-10)
            # determinant closed form against the dense determinant
            assert determinant_closed_form(h) == pytest.approx(
                float(np.linalg.det(hessian_matrix(h))), rel=1e-10
            )

    # diagonal entry via the cotangent of the rotation angle, elliptic range
    L = 2.1
    for a in (-1.3, -0.5, 0.83, 1.7):
        alpha = 2.0 * math.acos(-a / 2.0)
        for r in (1, 2, 3, 4):
            if abs(math.sin(r * alpha / 2.0)) < 1e-3:
                continue
            want = -L / (2.0 * math.sin(alpha / 2.0)) / math.tan(r * alpha / 2.0)
            assert inverse_fourier(_h(r, a, L=L), 1, 1) == pytest.approx(
                want, rel=1e-10
            )

    # parity: like-parity diagonal entries agree; swapping the two arc
    # parameters swaps the two diagonal values
    inv_ab = inverse_matrix(_h(3, 1.4, b=3.3), method="dense")
    inv_ba = inverse_matrix(_h(3, 3.3, b=1.4), method="dense")
    d_ab, d_ba = np.diag(inv_ab), np.diag(inv_ba)
    assert np.abs(d_ab[0::2] - d_ab[0]).max() <= 1e-10 * abs(d_ab[0])
    assert np.abs(d_ab[1::2] - d_ab[1]).max() <= 1e-10 * abs(d_ab[1])
    assert d_ab[0] == pytest.approx(d_ba[1], rel=1e-10)
    assert d_ab[1] == pytest.approx(d_ba[0], rel=1e-10)


# 3 -------------------------------------------------------------------------


def test_exceptional_set_and_cubic_sums():
    roots = sorted(bad_set())
    assert len(roots) == 4
    assert np.abs(np.array(roots) - np.array([-2.0, -1.0, 0.0, 2.0])).max() <= 1e-9
    assert badset_report()["factorization_residual"] < 1e-10

    for a in (2.7, -3.1, 4.3, -5.2):
        for L in (1.0, 2.3):
            got1 = cubic_sum(_h(1, a, L=L), method="direct")
            assert got1 == pytest.approx(
                (-L / (a * a - 4.0)) ** 3 * (a**3 - 8.0), rel=1e-10
            )
        got2 = cubic_sum(_h(2, a, L=1.4), method="direct")
        want2 = (-1.4 / (a**4 - 4 * a**2)) ** 3 * (
            a**9 - 6 * a**7 - 2 * a**6 + 12 * a**5
        )
        assert got2 == pytest.approx(want2, rel=1e-10)

    rng = np.random.default_rng(33)
    for r in range(1, 13):
        drawn = 0
        while drawn < 5:
            a = float(rng.uniform(-6.0, 6.0))
            h = _h(r, a)
            try:
                direct = cubic_sum(h, method="direct")
            except ObstructionError:
                continue
            drawn += 1
            double_sum = cubic_sum(h, method="dedekind")
            assert abs(double_sum - direct) <= 1e-9 * max(1.0, abs(direct))


# 4 -------------------------------------------------------------------------


def test_length_hessian_matches_poincare_determinant():
    L = 0.9
    spec = DomainSpec(
        "twoarc",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.17, 0.09), half_width=4.0),
        BoundaryArc((-L / 2, 0.0, 0.22, -0.26, 0.05), half_width=4.0),
    )
    for r in (1, 2, 3, 4):
        orbit = find_orbit(spec, r, np.zeros(2 * r))
        assert snell_residual(spec, orbit) <= 1e-10
        pdata = poincare_numeric(spec, orbit)
        lhs = float(np.linalg.det(np.eye(2) - pdata.matrix))
        rhs = -spec.L ** (2 * r) * float(
            np.linalg.det(hessian_matrix(CirculantHessian.from_spec(spec, r)))
        )
        assert lhs == pytest.approx(rhs, rel=1e-6)


# 5 -------------------------------------------------------------------------


def test_diagram_sum_matches_operator_on_random_problems():
    start = time.perf_counter()
    rng = np.random.default_rng(55)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        j = int(rng.integers(1, 4))
        problem = random_sp_problem(rng, n)
        lhs = sp_coefficient_diagrams(problem, j)
        rhs = sp_coefficient_direct(problem, j)
        assert abs(lhs - rhs) <= 1e-9 * max(abs(rhs), 1e-12)
    assert time.perf_counter() - start < 60.0


# 6 -------------------------------------------------------------------------


def test_expansion_error_halves_at_the_predicted_rate():
    c3 = 0.3
    deg = 10
    phase = MultiJet.from_terms({(2,): 0.5, (3,): c3 / 6.0}, 1, deg)
    amp = MultiJet.from_terms(
        {(2 * m,): (-0.5) ** m / math.factorial(m) for m in range(deg // 2 + 1)},
        1,
        deg,
    )
    problem = SPProblem.from_phase(phase, amp)
    ks = (40.0, 80.0, 160.0)
    quads = {
        k: oscillatory_quadrature(
            lambda x: x**2 / 2.0 + c3 * x**3 / 6.0,
            lambda x: np.exp(-(x**2) / 2.0),
            k,
            -5.5,
            5.5,
            limit=3000,
        )[0]
        for k in ks
    }
    for j_cap in (0, 1, 2):
        errors = [abs(quads[k] - full_expansion(problem, k, j_cap)) for k in ks]
        predicted = 2.0 ** -(j_cap + 1.5)
        for lo, hi in zip(ks, ks[1:]):
            ratio = errors[ks.index(hi)] / errors[ks.index(lo)]
            assert abs(ratio / predicted - 1.0) <= 0.25


# 7 -------------------------------------------------------------------------


def test_sensitivity_coefficients_and_vanishing_rows():
    L = 2.0
    symmetric = DomainSpec(
        "updown",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.12, 0.05, -0.033, 0.021, 0.011, -0.017, 0.009, 0.004)),
    )
    nonsymmetric = DomainSpec(
        "twoarc",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.12, 0.05, -0.033, 0.021, 0.011, -0.017, 0.009, 0.004)),
        BoundaryArc((-L / 2, 0.0, 0.22, -0.26, 0.05, 0.03, -0.01, 0.008, 0.013, -0.005, 0.002)),
    )
    for spec in (symmetric, nonsymmetric):
        arcs = ("top",) if spec.kind == "updown" else ("top", "bottom")
        for r in (1, 2):
            for j in (2, 3, 4):
                top = lambda s: invariant_top(s, r, j)
                full = lambda s: invariant_full(s, r, j)
                for which in arcs:
                    for k in (2 * j, 2 * j - 1):
                        # the invariants are polynomial (degree <= 2) in each
                        # top datum, so a wide centered step is still exact
                        # and keeps rounding noise far below the coefficient
                        want = _centered(top, spec, which, k, delta=0.25)
                        got = _centered(full, spec, which, k, delta=0.25)
                        assert abs(got - want) <= 1e-7 * max(abs(want), 1e-12)
                # data beyond the top order leave the invariant unchanged
                base = full(spec)
                for k in (2 * j + 1, 2 * j + 2):
                    if spec.f.order >= k:
                        moved = full(_shift(spec, "top", k, 0.5))
                        assert abs(moved - base) <= 1e-10 * max(abs(base), 1.0)

    # the order-one census at j = 2 has five rows; the maximal derivative
    # rides on exactly two of them and the other three are silent
    report = max_derivative_report(principal_shift_factory(symmetric, 1, 2), 2)
    rows = report["rows"]
    assert len(rows) == 5

    def locate(graph):
        key = graph.canonical().sort_key()
        hits = [
            i
            for i, row in enumerate(rows)
            if FeynmanGraph(
                tuple(tuple(v) for v in row["graph"]["closed_vertices"]),
                row["graph"]["open_loops"],
                tuple(tuple(e) for e in row["graph"]["edges_between"]),
            ).canonical().sort_key()
            == key
        ]
        assert len(hits) == 1
        return hits[0]

    flower, chain, triple = contributing_graphs(2)
    silent = [
        locate(FeynmanGraph((), 1, ())),
        locate(FeynmanGraph(((1, 1),), 0, ((0,),))),
        locate(flower),
    ]
    assert report["even_carriers"] == [locate(flower)]
    assert sorted(report["odd_carriers"]) == sorted([locate(chain), locate(triple)])
    for i in silent:
        assert abs(rows[i]["top_odd_sensitivity"]) <= 1e-12


# 8 -------------------------------------------------------------------------


def test_amplitude_identity_suite():
    from wavetrace.invariants import build_principal, principal_leading_value

    L = 2.0
    spec = DomainSpec(
        "twoarc",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.12, 0.05, -0.033, 0.021, 0.011, -0.017, 0.009)),
        BoundaryArc((-L / 2, 0.0, 0.22, -0.26, 0.05, 0.03, -0.01, 0.008, 0.013, -0.005)),
    )
    arcs = (spec.f, spec.f_minus)
    for r in (1, 2, 3):
        n = 2 * r
        for j in (1, 2, 3, 4):
            term = build_principal(spec, r, max(2 * j - 2, 2))
            # critical point: both jets are gradient-free
            assert np.abs(term.phase_jets.gradient_at_zero()).max() <= 1e-11
            assert np.abs(term.amplitude_jets.gradient_at_zero()).max() <= 1e-11
            # leading value of the principal amplitude
            lead = principal_leading_value(r, L)
            assert abs(term.amplitude_jets.value - lead) <= 1e-11 * abs(lead)
            # the order-(2j-2) amplitude jet never reads f^(2j-1);
            # j = 1 would probe f'(0), which the normalization pins to zero
            if j == 1:
                continue
            moved = _shift(spec, "top", 2 * j - 1, 0.6)
            other = build_principal(moved, r, max(2 * j - 2, 2))
            assert np.abs(
                term.amplitude_jets.coeffs - other.amplitude_jets.coeffs
            ).max() <= 1e-11 * max(np.abs(term.amplitude_jets.coeffs).max(), 1.0)
        # third derivatives of the phase: pure ones are twice the signed
        # cubic of the bounce arc, mixed ones vanish outright
        term = build_principal(spec, r, 4)
        for p in range(n):
            sign = 1.0 if p % 2 == 0 else -1.0
            alpha = [0] * n
            alpha[p] = 3
            want = 2.0 * sign * arcs[p % 2].derivative(3)
            assert abs(extract_partial(term.phase_jets, alpha) - want) <= 1e-11 * max(
                abs(want), 1.0
            )
            for q in range(n):
                if q != p:
                    alpha = [0] * n
                    alpha[p], alpha[q] = 2, 1
                    assert abs(extract_partial(term.phase_jets, alpha)) <= 1e-11


# 9 -------------------------------------------------------------------------


def test_inverse_round_trips_across_the_three_classes():
    start = time.perf_counter()

    rng = np.random.default_rng(99)
    for i in range(50):
        spec = random_mirror_spec(rng)
        table = forward_table(spec, 3, 5)
        assert table.symmetry_class == "updown"
        result = recover(table, 5)
        want = convex_representative(spec, 10)
        for k, value in want.items():
            assert abs(result.taylor[k] - value) <= 1e-8 * max(abs(value), 1.0)

    for i in range(50):
        spec = random_mirror_spec(rng, even_only=True)
        table = forward_table(spec, 3, 5)
        assert table.symmetry_class == "twoarc-symmetric"
        result = recover(table, 5)
        want = convex_representative(spec, 10)
        for k, value in want.items():
            assert abs(result.taylor[k] - value) <= 1e-8 * max(abs(value), 1.0)

    for i in range(50):
        m = (2, 3, 5)[i % 3]
        spec = random_dihedral_spec(rng, m)
        table = forward_table(spec, 3, 5)
        assert table.symmetry_class == f"dihedral-{m}"
        result = recover(table, 5)
        for k in range(2, 11):
            want = spec.f.derivative(k) if k % 2 == 0 else 0.0
            assert abs(result.taylor[k] - want) <= 1e-8 * max(abs(want), 1.0)

    # obstruction inputs end in a named error, never in numbers
    L = 2.0
    tail = (0.05, 0.05, -0.033, 0.021, 0.011, -0.017, 0.009, 0.004)
    for a in EXCEPTIONAL_FLOQUET:
        spec = DomainSpec(
            "updown", L, BoundaryArc((L / 2, 0.0, -(a + 2.0) / (4.0 * L)) + tail)
        )
        with pytest.raises(ObstructionError) as err:
            recover(forward_table(spec, 3, 5), 5)
        assert err.value.name in (
            "singular-decoupling",
            "degenerate-orbit",
            "symbol-pole",
        )

    flat_cubic = random_mirror_spec(rng, even_only=True)
    with pytest.raises(ObstructionError) as err:
        recover_symmetric(
            forward_table(flat_cubic, 3, 5),
            flat_cubic.L,
            kt_parameters(flat_cubic)[0],
            5,
        )
    assert err.value.name == "vanishing-cubic"

    assert time.perf_counter() - start < 120.0


# 10 ------------------------------------------------------------------------


def test_decoupling_determinants_and_exceptional_ratios():
    rng = np.random.default_rng(123)
    drawn = 0
    while drawn < 100:
        a = float(rng.uniform(-5.0, 5.0))
        if min(abs(a - b) for b in EXCEPTIONAL_FLOQUET) < 1e-3:
            continue
        drawn += 1
        r, s, det = decoupling_pair(a, r_max=6)
        assert r != s and max(r, s) <= 6
        assert abs(det) > 1e-8

    # on the exceptional set the two families are proportional: the ratio
    # is the same for every iterate where the entries exist (at a = 0 the
    # diagonal entry vanishes identically, so take it in the numerator)
    for a in (0.0, -1.0):
        ratios = []
        for r in range(1, 7):
            try:
                h = _h(r, a)
                f3 = cubic_sum(h, method="direct")
                h11 = inverse_fourier(h, 1, 1)
            except ObstructionError:
                continue
            ratios.append(h11**2 / f3)
        assert len(ratios) >= 3
        spread = max(ratios) - min(ratios)
        assert spread <= 1e-9 * max(1.0, max(abs(x) for x in ratios))
