"""Wave invariants of the distinguished orbit, computed by two routes.

The trace contribution of the r-fold orbit expands in inverse powers of
the wavenumber; this module evaluates those coefficients.  Route one
(`invariant_full`) builds the principal oscillatory integral from the
boundary jets and feeds it to the diagram-sum engine.  Route two
(`invariant_top`) evaluates the closed form for the part carrying the
two highest boundary derivatives, with graph weights taken verbatim as
reciprocal automorphism orders.  Sensitivity tests tie the routes
together; the recovery pipeline consumes the closed form.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .billiard import length_jet
from .domain import DomainSpec, ObstructionError, kt_parameters
from .feynman import (
    FeynmanGraph,
    SPProblem,
    automorphism_order,
    sp_coefficient_diagrams,
)
from .hessian import (
    CirculantHessian,
    dihedral_inverse_entry,
    dihedral_parameters,
    hessian_matrix,
)
from .jets import MultiJet, jet_power

_IPOW = (1 + 0j, 1j, -1 + 0j, -1j)


def _i_power(m: int) -> complex:
    return _IPOW[m % 4]


NORMALIZATIONS = ("TopOnly", "FullPrincipal")

# Square of the per-link constant in the principal amplitude: each chord
# carries 2 * (-i/4) * sqrt(2/pi) * e^{3 pi i/4} / sqrt(chord), and the
# square of that constant is i / (2 pi).
LINK_CONSTANT_SQ = 1j / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# outgoing cylinder-wave amplitude


def hankel_a1(t: complex) -> complex:
    """Slowly varying factor of the outgoing cylinder wave at argument t.

    Defined by H^(1)_1(t) = t^(-1/2) e^(i(t - 3 pi/4)) a1(t) and computed
    by quadrature of the exact Laplace-type representation

        a1(t) = sqrt(2/pi) / Gamma(3/2)
                * int_0^inf e^(-s) s^(1/2) (1 - s/(2 i t))^(1/2) ds,

    valid for Re t > 0.  As t -> infinity the value tends to sqrt(2/pi).

    Args:
        t: evaluation point, real positive or complex with Re t > 0.

    Returns:
        complex value of a1(t).

    Raises:
        ValueError: Re t <= 0.
    """
    tc = complex(t)
    if tc.real <= 0.0:
        raise ValueError(f"hankel_a1 requires Re t > 0, got {t!r}")
    half_it2 = 1.0 / (2j * tc)

    def integrand(s: float) -> complex:
        return math.exp(-s) * math.sqrt(s) * (1.0 - s * half_it2) ** 0.5

    re, _ = integrate.quad(lambda s: integrand(s).real, 0.0, np.inf, limit=200)
    im, _ = integrate.quad(lambda s: integrand(s).imag, 0.0, np.inf, limit=200)
    return math.sqrt(2.0 / math.pi) / math.gamma(1.5) * complex(re, im)


def hankel_a1_series(num_terms: int) -> np.ndarray:
    """Coefficients c_m of the large-argument expansion a1(t) ~ sum c_m t^-m.

    Termwise integration of the binomial series of (1 - s/(2it))^(1/2)
    against e^(-s) s^(1/2) ds gives

        c_m = sqrt(2/pi) * binom(1/2, m) * (i/2)^m * Gamma(m + 3/2) / Gamma(3/2).
    """
    if num_terms < 1:
        raise ValueError("num_terms must be >= 1")
    out = np.empty(num_terms, dtype=complex)
    for m in range(num_terms):
        out[m] = (
            math.sqrt(2.0 / math.pi)
            * special.binom(0.5, m)
            * (0.5j) ** m
            * math.gamma(m + 1.5)
            / math.gamma(1.5)
        )
    return out


# ---------------------------------------------------------------------------
# the principal term of one orbit


def principal_leading_value(r: int, length: float) -> complex:
    """Amplitude of the principal term at the orbit: 2rL * L^-r * (i/2pi)^r."""
    return 2.0 * r * length * length ** (-r) * LINK_CONSTANT_SQ**r


@dataclass(frozen=True)
class PrincipalTerm:
    """Stationary-phase data of one orbit iterate.

    Attributes:
        r: iterate count (the orbit bounces 2r times).
        phase_jets: jet of the chord-length sum at the orbit.
        amplitude_jets: complex jet of the principal amplitude.
        orbit_length: 2rL, the geometric length of the iterate.
        length_power: L^-r from the chord denominators.
        propagator_constant: (i/2pi)^r, the product of per-link constants.
    """

    r: int
    phase_jets: MultiJet
    amplitude_jets: MultiJet
    orbit_length: float
    length_power: float
    propagator_constant: complex

    @property
    def leading_value(self) -> complex:
        """Amplitude at the orbit, orbit_length * length_power * constant."""
        return self.orbit_length * self.length_power * self.propagator_constant

    def problem(self) -> SPProblem:
        """Package the jets for the stationary-phase engine."""
        return SPProblem.from_phase(self.phase_jets, self.amplitude_jets)


def build_principal(spec: DomainSpec, r: int, order: int) -> PrincipalTerm:
    """Assemble the principal phase and amplitude jets of the r-th iterate.

    The phase is the cyclic chord-length sum in the 2r chart coordinates.
    The amplitude is the length jet times one factor per chord,

        c * w_p * [(x_p - x_q) f'_p(x_p) - (f_p(x_p) - f_q(x_q))] / chord^(3/2),

    with c^2 = i/(2 pi) and w_p = +/-1 the inward-orientation sign of the
    arc at bounce p.  At the orbit the amplitude equals
    2rL * L^-r * (i/2pi)^r and its gradient vanishes.

    Args:
        spec: two-arc domain ("twoarc" or "updown").
        r: iterate count, >= 1.
        order: jet degree; both arcs must store Taylor data to this order.

    Raises:
        ValueError: dihedral spec, r < 1, order < 2, or arcs too short.
    """
    if spec.kind == "dihedral":
        raise ValueError(
            "build_principal handles the two-arc classes; dihedral orbits "
            "have no principal amplitude here"
        )
    if r < 1:
        raise ValueError("r must be >= 1")
    if order < 2:
        raise ValueError("order must be >= 2")
    arcs = (spec.upper, spec.lower)
    for arc in arcs:
        if arc.order < order:
            raise ValueError(
                f"insufficient jet order: arc stores {arc.order}, need {order}"
            )
    n = 2 * r
    phase = length_jet(spec, r, order)

    product = MultiJet.constant(1.0 + 0.0j, n, order)
    for p in range(n):
        q = (p + 1) % n
        arc_p, arc_q = arcs[p % 2], arcs[q % 2]
        sign = 1.0 if p % 2 == 0 else -1.0
        xp = MultiJet.variable(p, n, order)
        xq = MultiJet.variable(q, n, order)
        fp = MultiJet.from_univariate(arc_p.taylor, p, n, order)
        fq = MultiJet.from_univariate(arc_q.taylor, q, n, order)
        dfp = tuple(
            (k + 1) * arc_p.taylor[k + 1] for k in range(len(arc_p.taylor) - 1)
        )
        slope = MultiJet.from_univariate(dfp, p, n, order)
        dx = xp - xq
        df = fp - fq
        chord_sq = dx * dx + df * df
        numer = dx * slope - df
        product = product * (numer * jet_power(chord_sq, -0.75)) * sign
    amplitude = (phase * product) * LINK_CONSTANT_SQ**r

    return PrincipalTerm(
        r=r,
        phase_jets=phase,
        amplitude_jets=amplitude,
        orbit_length=2.0 * r * spec.L,
        length_power=spec.L ** (-r),
        propagator_constant=LINK_CONSTANT_SQ**r,
    )


# ---------------------------------------------------------------------------
# graph weights of the closed form


def contributing_graphs(
    j: int,
) -> tuple[FeynmanGraph, FeynmanGraph | None, FeynmanGraph | None]:
    """The three order-(j-1) graphs that carry the two highest data.

    Returns (flower, two-loop-chain, triple-edge): the j-loop flower holds
    the order-2j derivative; the other two hold the order-(2j-1) one and
    need j >= 2.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    flower = FeynmanGraph(((j, 0),), 0, ((0,),))
    if j == 1:
        return flower, None, None
    chain = FeynmanGraph(((j - 1, 0), (1, 0)), 0, ((0, 1), (1, 0)))
    triple = FeynmanGraph(((j - 2, 0), (0, 0)), 0, ((0, 3), (3, 0)))
    return flower, chain, triple


def contributing_weights(j: int) -> tuple[float, float, float]:
    """(w1, w2, w3): reciprocal automorphism orders of the three graphs."""
    flower, chain, triple = contributing_graphs(j)
    w1 = 1.0 / automorphism_order(flower)
    if chain is None or triple is None:
        return w1, 0.0, 0.0
    return w1, 1.0 / automorphism_order(chain), 1.0 / automorphism_order(triple)


# ---------------------------------------------------------------------------
# the invariants themselves


def _inverse_hessian(spec: DomainSpec, r: int) -> np.ndarray:
    h = CirculantHessian.from_spec(spec, r)
    mat = hessian_matrix(h)
    if 1.0 / np.linalg.cond(mat) < 1e-12:
        raise ObstructionError(
            "degenerate-orbit",
            f"orbit Hessian is numerically singular at r = {r} "
            f"(a = {h.a:.12g}, b = {h.b:.12g})",
        )
    return np.linalg.inv(mat)


def _require_two_arc(spec: DomainSpec, op: str):
    if spec.kind == "dihedral":
        raise ValueError(f"{op} handles the two-arc classes; "
                         "use invariant_dihedral for dihedral specs")


def invariant_top(spec: DomainSpec, r: int, j: int) -> complex:
    """Top part of the (r, j) invariant: the closed form in the two
    highest boundary derivatives.

    With h the inverse orbit Hessian, w_p the arc orientation sign and
    f_p the arc at bounce p, the value is

        2 i^(j+1) A_r * [ w1 * sum_p (h^pp)^j 2 w_p f_p^(2j)(0)
            - 4 sum_{p,q} ( w2 (h^pp)^(j-1) h^qq h^pq
                          + w3 (h^pp)^(j-2) (h^pq)^3 )
                  w_p w_q f_p^(2j-1)(0) f_q^(3)(0) ],

    where A_r = 2rL * L^-r * (i/2pi)^r and (w1, w2, w3) are the
    reciprocal automorphism orders from `contributing_weights`.  For
    j = 1 only the even-derivative term is present.

    Raises:
        ValueError: dihedral spec, j < 1, or arcs shorter than 2j.
        ObstructionError("degenerate-orbit"): singular orbit Hessian.
    """
    _require_two_arc(spec, "invariant_top")
    if j < 1:
        raise ValueError("j must be >= 1")
    hinv = _inverse_hessian(spec, r)
    n = 2 * r
    diag = np.diag(hinv)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    arcs = (spec.upper, spec.lower)
    even_data = np.array([arcs[p % 2].derivative(2 * j) for p in range(n)])
    w1, w2, w3 = contributing_weights(j)

    even_term = w1 * float(np.sum(diag**j * 2.0 * signs * even_data))
    odd_term = 0.0
    if j >= 2:
        odd_data = np.array([arcs[p % 2].derivative(2 * j - 1) for p in range(n)])
        cubic_data = np.array([arcs[p % 2].derivative(3) for p in range(n)])
        pair = w2 * np.outer(diag ** (j - 1), diag) * hinv
        pair += w3 * np.outer(diag ** (j - 2), np.ones(n)) * hinv**3
        odd_term = float((signs * odd_data) @ pair @ (signs * cubic_data))

    lead = principal_leading_value(r, spec.L)
    return 2.0 * _i_power(j + 1) * lead * (even_term - 4.0 * odd_term)


def invariant_full(spec: DomainSpec, r: int, j: int) -> complex:
    """Full (r, j) invariant: order-(j-1) diagram-sum coefficient of the
    principal oscillatory integral, doubled for the mirror word.

    Contains everything `invariant_top` does plus all lower-derivative
    terms of the principal part; contributions that are not captured by
    the principal integral are outside this normalization, so only the
    top part and the stated sensitivities are exact.

    Raises:
        ObstructionError("unsupported"): dihedral spec.
        ValueError: j < 1 or arcs shorter than 2j.
    """
    if spec.kind == "dihedral":
        raise ObstructionError(
            "unsupported",
            "invariant_full needs the two-arc principal amplitude; "
            "dihedral tables use invariant_dihedral",
        )
    if j < 1:
        raise ValueError("j must be >= 1")
    term = build_principal(spec, r, 2 * j)
    return 2.0 * sp_coefficient_diagrams(term.problem(), j - 1)


def invariant_dihedral(spec: DomainSpec, r: int, j: int) -> float:
    """(r, j) invariant of the m-gon orbit of a dihedral domain:
    m r (h^11)^j f^(2j)(0), with h^11 the diagonal inverse-Hessian entry.

    Raises:
        ValueError: non-dihedral spec, j < 1, or arc shorter than 2j.
        ObstructionError("symbol-pole"): singular orbit Hessian.
    """
    if spec.kind != "dihedral":
        raise ValueError("invariant_dihedral requires a dihedral spec")
    if j < 1:
        raise ValueError("j must be >= 1")
    assert spec.m is not None
    s_param, link = dihedral_parameters(spec)
    h11 = dihedral_inverse_entry(spec.m, r, s_param, link, 1, 1)
    return spec.m * r * h11**j * spec.f.derivative(2 * j)


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class InvariantTable:
    """A finite block of invariants with the metadata recovery needs.

    Attributes:
        length: L, half the primitive orbit length.
        floquet_parameter: the circulant diagonal parameter (a for the
            two-arc classes, s for dihedral).
        symmetry_class: "updown" | "twoarc" | "twoarc-symmetric" |
            "dihedral-<m>".
        normalization: "TopOnly" (closed forms, zero remainder) or
            "FullPrincipal" (diagram-sum values).
        entries: (r, j) -> invariant value.
    """

    length: float
    floquet_parameter: float
    symmetry_class: str
    normalization: str
    entries: dict[tuple[int, int], complex]

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(
                f"normalization must be one of {NORMALIZATIONS}, "
                f"got {self.normalization!r}"
            )

    def entry(self, r: int, j: int) -> complex:
        return self.entries[(r, j)]

    def to_json(self) -> dict:
        return {
            "L": self.length,
            "a": self.floquet_parameter,
            "class": self.symmetry_class,
            "normalization": self.normalization,
            "entries": [
                {"r": r, "j": j, "re": v.real, "im": v.imag}
                for (r, j), v in sorted(self.entries.items())
            ],
        }

    @staticmethod
    def from_json(data: dict) -> "InvariantTable":
        entries = {
            (int(e["r"]), int(e["j"])): complex(float(e["re"]), float(e["im"]))
            for e in data["entries"]
        }
        return InvariantTable(
            length=float(data["L"]),
            floquet_parameter=float(data["a"]),
            symmetry_class=str(data["class"]),
            normalization=str(data["normalization"]),
            entries=entries,
        )


def _class_label(spec: DomainSpec) -> str:
    """Recovery class of a spec: "dihedral-<m>", "twoarc-symmetric"
    (mirror symmetry plus an even arc — the ellipse-like class),
    "updown" (mirror symmetry only), or generic "twoarc"."""
    if spec.kind == "dihedral":
        return f"dihedral-{spec.m}"
    if spec.symmetric:
        tol = 1e-12 * max(1.0, max(abs(c) for c in spec.f.taylor))
        if all(abs(c) <= tol for c in spec.f.taylor[3::2]):
            return "twoarc-symmetric"
        return "updown"
    return "twoarc"


def forward_table(
    spec: DomainSpec,
    r_max: int,
    j_max: int,
    normalization: str = "TopOnly",
) -> InvariantTable:
    """Tabulate invariants for 1 <= r <= r_max, 1 <= j <= j_max.

    TopOnly rows come from the closed forms, FullPrincipal rows from the
    diagram sum (two-arc classes only).

    Raises:
        ValueError: bad normalization, or FullPrincipal with a dihedral
            spec (propagated as ObstructionError("unsupported")).
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(
            f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}"
        )
    if r_max < 1 or j_max < 1:
        raise ValueError("r_max and j_max must be >= 1")
    entries: dict[tuple[int, int], complex] = {}
    for r in range(1, r_max + 1):
        for j in range(1, j_max + 1):
            if spec.kind == "dihedral":
                if normalization == "FullPrincipal":
                    raise ObstructionError(
                        "unsupported",
                        "FullPrincipal tables are two-arc only",
                    )
                entries[(r, j)] = complex(invariant_dihedral(spec, r, j))
            elif normalization == "TopOnly":
                entries[(r, j)] = invariant_top(spec, r, j)
            else:
                entries[(r, j)] = invariant_full(spec, r, j)
    if spec.kind == "dihedral":
        param = dihedral_parameters(spec)[0]
    else:
        param = kt_parameters(spec)[0]
    return InvariantTable(
        length=spec.L,
        floquet_parameter=param,
        symmetry_class=_class_label(spec),
        normalization=normalization,
        entries=entries,
    )


def principal_shift_factory(spec: DomainSpec, r: int, j: int):
    """Factory for `max_derivative_report`: rebuilds the principal
    problem with the top-arc data f^(2j)(0) and f^(2j-1)(0) shifted.

    The returned callable takes (even_shift, odd_shift) and reassembles
    every jet from the shifted arc, so finite differences through it see
    exactly the dependence of the diagram sum on those two data.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    _require_two_arc(spec, "principal_shift_factory")

    def factory(even_shift: float, odd_shift: float) -> SPProblem:
        arc = spec.f
        if even_shift:
            arc = arc.with_derivative(2 * j, arc.derivative(2 * j) + even_shift)
        if odd_shift:
            arc = arc.with_derivative(
                2 * j - 1, arc.derivative(2 * j - 1) + odd_shift
            )
        shifted = dataclasses.replace(spec, f=arc)
        return build_principal(shifted, r, 2 * j).problem()

    return factory
