"""Hessians of the billiard length functional at iterated two-point orbits.

In graph coordinates straightening the orbit, the Hessian of the length of
the r-fold bouncing-ball path is the cyclic tridiagonal-plus-corners matrix

    H_2r = -(1/L) * C(a, b),

where C has diagonal alternating ``a`` (odd slots, the f_+ bounces) and
``b`` (even slots), unit entries on the cyclic off-diagonals (doubled to 2
at size two), and a = -2(1 + L f''_+(0)), b = -2(1 - L f''_-(0)).

For mirror-symmetric tables (a = b) the matrix is a genuine circulant and
everything is explicit: inverse entries by finite Fourier inversion or by
Chebyshev polynomials, row sums, and the cubic sums F_3(r, a) that control
the decoupling step of the inverse spectral algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_chebyt, eval_chebyu

from wavetrace.domain import DomainSpec, ObstructionError, kt_parameters

__all__ = [
    "CirculantHessian",
    "hessian_matrix",
    "determinant_closed_form",
    "inverse_fourier",
    "inverse_chebyshev",
    "inverse_matrix",
    "inverse_row",
    "row_sum",
    "cubic_sum",
    "bad_set",
    "badset_report",
    "decoupling_pair",
    "dihedral_hessian",
    "dihedral_parameters",
]

_POLE_TOL = 1e-8


@dataclass(frozen=True)
class CirculantHessian:
    """Length-Hessian data of the r-fold iterate of a two-point orbit.

    Attributes:
        r: iterate count (matrix size is 2r).
        L: half-length of the primitive orbit.
        a: diagonal parameter at the odd (top) bounce slots.
        b: diagonal parameter at the even (bottom) slots; equals ``a``
            for mirror-symmetric tables.
        symmetric: whether a == b (exact comparison; symmetric specs
            produce bit-equal parameters).
    """

    r: int
    L: float
    a: float
    b: float
    symmetric: bool = field(init=False)

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("iterate r must be >= 1")
        if self.L <= 0:
            raise ValueError("L must be positive")
        object.__setattr__(self, "symmetric", self.a == self.b)

    @classmethod
    def from_spec(cls, spec: DomainSpec, r: int) -> "CirculantHessian":
        a, b = kt_parameters(spec)
        if spec.symmetric:
            b = a
        return cls(r=r, L=spec.L, a=a, b=b)

    @property
    def n(self) -> int:
        return 2 * self.r

    def symbol_values(self) -> np.ndarray:
        """p_{a,r}(w^k) = a + 2 cos(pi k / r) for k = 0..2r-1 (symmetric)."""
        k = np.arange(self.n)
        return self.a + 2.0 * np.cos(np.pi * k / self.r)


def _require_symmetric(h: CirculantHessian, what: str):
    if not h.symmetric:
        raise ValueError(f"{what} requires a mirror-symmetric Hessian (a == b)")


def _checked_symbol(h: CirculantHessian) -> np.ndarray:
    vals = h.symbol_values()
    bad = np.flatnonzero(np.abs(vals) <= _POLE_TOL)
    if bad.size:
        k = int(bad[0])
        raise ObstructionError(
            "symbol-pole",
            f"p_a,r(w^k) vanishes at k = {k} (r = {h.r}, a = {h.a:.12g}): "
            "the orbit iterate is resonant and the Hessian is singular",
        )
    return vals


def hessian_matrix(h: CirculantHessian) -> np.ndarray:
    """Dense 2r x 2r Hessian matrix -(1/L) C(a, b).

    At size two the cyclic neighbours coincide and the off-diagonal entry
    doubles: H_2 = -(1/L) [[a, 2], [2, b]].
    """
    n = h.n
    mat = np.zeros((n, n))
    idx = np.arange(n)
    mat[idx, idx] = np.where(idx % 2 == 0, h.a, h.b)
    if n == 2:
        mat[0, 1] = mat[1, 0] = 2.0
    else:
        mat[idx, (idx + 1) % n] += 1.0
        mat[idx, (idx - 1) % n] += 1.0
    return -mat / h.L


def determinant_closed_form(h: CirculantHessian) -> float:
    """det H_2r = -L^{-2r} (2 - 2 T_2r(-a/2)); valid for all real a.

    For elliptic parameters T_2r(-a/2) = cos(r * alpha); the same rational
    expression continues the hyperbolic (cosh) case.
    """
    _require_symmetric(h, "determinant_closed_form")
    t = float(eval_chebyt(h.n, -h.a / 2.0))
    return -float(h.L) ** (-h.n) * (2.0 - 2.0 * t)


def inverse_row(h: CirculantHessian) -> np.ndarray:
    """First row (h^{11}, ..., h^{1,2r}) of the inverse, by Fourier inversion.

    Raises:
        ObstructionError("symbol-pole"): resonant parameter, naming k.
    """
    _require_symmetric(h, "inverse_row")
    vals = _checked_symbol(h)
    return (-h.L * np.fft.ifft(1.0 / vals)).real


def inverse_fourier(h: CirculantHessian, p: int, q: int) -> float:
    """Inverse entry h^{pq} by the finite Fourier sum over symbol values.

    h^{1q} = (-L / 2r) sum_k w^{(q-1)k} / p_{a,r}(w^k) with w = e^{i pi / r};
    general (p, q) follows from the circulant shift h^{pq} = h^{1, q-p+1}.
    """
    _require_symmetric(h, "inverse_fourier")
    _check_index(h, p)
    _check_index(h, q)
    vals = _checked_symbol(h)
    k = np.arange(h.n)
    w = np.exp(1j * np.pi * k / h.r)
    total = (-h.L / h.n) * np.sum(w ** ((q - p) % h.n * 1.0) / vals)
    # vals is even in k, so the sum is real up to roundoff on this scale:
    roundoff = 1e-8 * (h.L / h.n) * float(np.sum(1.0 / np.abs(vals)))
    assert abs(total.imag) <= max(1e-12, roundoff)
    return float(total.real)


def inverse_chebyshev(h: CirculantHessian, p: int, q: int) -> float:
    """Inverse entry h^{pq} in terms of Chebyshev polynomials.

    (-L)^{-1} h^{pq} = [U_{2r-q+p-1}(-a/2) + U_{q-p-1}(-a/2)]
                       / (2 [1 - T_{2r}(-a/2)])  for p <= q, with U_{-1} = 0;
    the matrix is symmetric so p > q swaps the indices.
    """
    _require_symmetric(h, "inverse_chebyshev")
    _check_index(h, p)
    _check_index(h, q)
    if p > q:
        p, q = q, p
    x = -h.a / 2.0
    denom = 2.0 * (1.0 - float(eval_chebyt(h.n, x)))
    if abs(denom) <= _POLE_TOL ** 2:
        raise ObstructionError(
            "symbol-pole",
            f"1 - T_2r(-a/2) vanishes (r = {h.r}, a = {h.a:.12g})",
        )
    return -h.L * (_chebyu(h.n - q + p - 1, x) + _chebyu(q - p - 1, x)) / denom


def _chebyu(n: int, x: float) -> float:
    return 0.0 if n < 0 else float(eval_chebyu(n, x))


def _check_index(h: CirculantHessian, p: int):
    if not 1 <= p <= h.n:
        raise ValueError(f"index {p} outside 1..{h.n}")


def inverse_matrix(h: CirculantHessian, method: str = "fourier") -> np.ndarray:
    """Full inverse of the Hessian matrix.

    Args:
        h: Hessian data.
        method: "fourier" | "chebyshev" (symmetric only) | "dense"
            (any a, b; plain linear solve).
    """
    n = h.n
    if method == "dense":
        return np.linalg.inv(hessian_matrix(h))
    if method == "fourier":
        row = inverse_row(h)
        return np.array([np.roll(row, p) for p in range(n)])
    if method == "chebyshev":
        _require_symmetric(h, "inverse_matrix(chebyshev)")
        out = np.empty((n, n))
        for p in range(1, n + 1):
            for q in range(p, n + 1):
                out[p - 1, q - 1] = out[q - 1, p - 1] = inverse_chebyshev(h, p, q)
        return out
    raise ValueError(f"unknown method {method!r}")


def row_sum(h: CirculantHessian) -> float:
    """sum_q h^{pq}, identical for every p; equals -L/(a+2).

    Raises:
        ObstructionError("symbol-pole"): at a = -2 (the k = 0 symbol value
            a + 2 vanishes).
    """
    return float(np.sum(inverse_row(h)))


def cubic_sum(h: CirculantHessian, method: str = "both") -> float:
    """F_3(r, a) = sum_q (h^{1q})^3.

    Computed directly (cube-and-sum of the inverse row) and/or as the
    double trigonometric character sum

        F_3 = (-L)^3/(2r)^2 * sum_{k1,k2} 1/(p(k1) p(k2) p(k1+k2)),

    with p(k) = a + 2 cos(pi k / r).  With method="both" the two routes
    are cross-checked before returning.
    """
    _require_symmetric(h, "cubic_sum")
    if method not in ("direct", "dedekind", "both"):
        raise ValueError(f"unknown method {method!r}")
    direct = dedekind = None
    if method in ("direct", "both"):
        direct = float(np.sum(inverse_row(h) ** 3))
    if method in ("dedekind", "both"):
        vals = _checked_symbol(h)
        inv = 1.0 / vals
        k = np.arange(h.n)
        wrap = (k[:, None] + k[None, :]) % h.n
        dedekind = float(
            (-h.L) ** 3 / h.n**2 * np.sum(inv[:, None] * inv[None, :] * inv[wrap])
        )
    if method == "direct":
        return direct  # type: ignore[return-value]
    if method == "dedekind":
        return dedekind  # type: ignore[return-value]
    scale = max(1.0, abs(direct))
    if abs(direct - dedekind) > 1e-9 * scale:  # type: ignore[operator]
        raise AssertionError(
            f"cubic-sum routes disagree: direct {direct!r} vs sum {dedekind!r}"
        )
    return direct  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# the finite exceptional set of Floquet parameters


def _difference_polynomial() -> np.ndarray:
    """Coefficients (descending) of (a^3-2a)^2 (a^3-8) - (a^9-6a^7-2a^6+12a^5).

    Roots of this polynomial are the parameters where the r = 1 and r = 2
    decoupling rows are proportional.
    """
    lhs = np.polymul(np.polymul([1, 0, -2, 0], [1, 0, -2, 0]), [1, 0, 0, -8])
    rhs = np.array([1, 0, -6, -2, 12, 0, 0, 0, 0, 0], dtype=float)
    return np.polysub(lhs, rhs)


def bad_set(cluster_tol: float = 1e-4) -> set[float]:
    """The exceptional Floquet parameters {0, -1, 2, -2}, recomputed.

    Solves the degree-9 coefficient identity equating the r = 1 and r = 2
    ratios F_3 / (h^11)^2.  Multiple roots (the polynomial has a triple
    root) come out of the companion-matrix solve with O(eps^(1/3)) errors,
    so any root within ``cluster_tol`` of an integer is certified against
    the exact integer-coefficient polynomial and snapped.
    """
    coeffs = np.trim_zeros(_difference_polynomial(), "f")
    int_coeffs = [int(round(c)) for c in coeffs]
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= cluster_tol].real
    out: list[float] = []
    for value in real:
        snapped = round(value)
        exact = sum(c * snapped**k for k, c in enumerate(reversed(int_coeffs)))
        canon = float(snapped) if abs(value - snapped) <= cluster_tol and exact == 0 else float(value)
        if not any(abs(canon - seen) <= cluster_tol for seen in out):
            out.append(canon)
    return set(out)


def badset_report() -> dict:
    """Roots plus factorization check of the exceptional-set polynomial.

    The difference polynomial factors as 2 a^2 (a-2)^3 (a+2) (a+1); the
    report carries both coefficient vectors and their max-abs residual.
    """
    diff = _difference_polynomial()
    factored = np.array([2.0])
    for factor in ([1, 0], [1, 0], [1, -2], [1, -2], [1, -2], [1, 2], [1, 1]):
        factored = np.polymul(factored, factor)
    pad = len(diff) - len(factored)
    factored_full = np.concatenate([np.zeros(pad), factored])
    residual = float(np.max(np.abs(diff - factored_full)))
    return {
        "roots": sorted(bad_set()),
        "difference_poly": [float(c) for c in diff],
        "factored_poly": [float(c) for c in factored_full],
        "factorization_residual": residual,
    }


def decoupling_pair(
    a: float, r_max: int, L: float = 1.0, tol: float = 1e-8
) -> tuple[int, int, float]:
    """Pick iterates (r, s) whose decoupling system is best conditioned.

    Maximizes |det [[ (h^11_2r)^2, F_3(r,a) ], [ (h^11_2s)^2, F_3(s,a) ]]|
    over 1 <= r < s <= r_max, skipping iterates whose symbol has a pole at
    this ``a``.

    Returns:
        (r, s, determinant) with the signed determinant of the best pair.

    Raises:
        ObstructionError("singular-decoupling"): every admissible pair has
            |det| <= tol — effectively a bad Floquet parameter.
    """
    rows: dict[int, tuple[float, float]] = {}
    for r in range(1, r_max + 1):
        h = CirculantHessian(r=r, L=L, a=a, b=a)
        try:
            h11 = inverse_fourier(h, 1, 1)
            f3 = cubic_sum(h, method="direct")
        except ObstructionError:
            continue
        rows[r] = (h11**2, f3)
    best: tuple[int, int, float] | None = None
    for r in sorted(rows):
        for s in sorted(rows):
            if s <= r:
                continue
            det = rows[r][0] * rows[s][1] - rows[s][0] * rows[r][1]
            if best is None or abs(det) > abs(best[2]):
                best = (r, s, det)
    if best is None or abs(best[2]) <= tol:
        raise ObstructionError(
            "singular-decoupling",
            f"effectively bad Floquet parameter: all decoupling determinants "
            f"below {tol:g} for a = {a:.12g}, r <= {r_max}",
        )
    return best


# ---------------------------------------------------------------------------
# dihedrally symmetric orbits


def dihedral_hessian(
    m: int, r: int, s_param: float, link_length: float
) -> np.ndarray:
    """Length Hessian of the r-fold iterated regular m-gon orbit.

    The matrix is (sin^2(pi/m) / link_length) * C(s_param, 1, 0, ..., 0, 1)
    of size mr, where the diagonal parameter for a boundary with profile f
    is s_param = 2 + 4 L f''(0) / (m sin(pi/m)) and link_length = 2L/m.
    The overall scale (positive, not -1/link) and the unit off-diagonals
    are pinned by the jet oracle in the test suite; at m = 2 the matrix
    coincides with the bouncing-ball Hessian up to conjugation by
    diag(1, -1, 1, ...), entry signs (-1)^{p+q}.
    """
    if m < 2 or r < 1:
        raise ValueError("need m >= 2 and r >= 1")
    if link_length <= 0:
        raise ValueError("link_length must be positive")
    n = m * r
    mat = np.zeros((n, n))
    idx = np.arange(n)
    mat[idx, idx] = s_param
    if n == 2:
        mat[0, 1] = mat[1, 0] = 2.0
    else:
        mat[idx, (idx + 1) % n] += 1.0
        mat[idx, (idx - 1) % n] += 1.0
    return math.sin(math.pi / m) ** 2 / link_length * mat


def dihedral_parameters(spec: DomainSpec) -> tuple[float, float]:
    """(s_param, link_length) of a dihedral spec's polygon orbit."""
    if spec.kind != "dihedral":
        raise ValueError("dihedral_parameters applies to dihedral specs")
    m = spec.m
    assert m is not None
    sin_t = math.sin(math.pi / m)
    s_param = 2.0 + 4.0 * spec.L * spec.f.derivative(2) / (m * sin_t)
    return s_param, 2.0 * spec.L / m


def dihedral_inverse_entry(
    m: int, r: int, s_param: float, link_length: float, p: int, q: int
) -> float:
    """Entry (p, q), 1-based, of the inverse dihedral Hessian.

    Circulant inversion with symbol s + 2 cos(2 pi k / (mr)); the size-2
    case (m = 2, r = 1) keeps the doubled corner and is handled by the
    same formula with symbol s + 2 cos(pi k).
    """
    n = m * r
    k = np.arange(n)
    vals = s_param + 2.0 * np.cos(2.0 * np.pi * k / n)
    bad = np.flatnonzero(np.abs(vals) <= _POLE_TOL)
    if bad.size:
        raise ObstructionError(
            "symbol-pole",
            f"dihedral symbol vanishes at k = {int(bad[0])} (m = {m}, r = {r})",
        )
    w = np.exp(2j * np.pi * k / n)
    total = np.sum(w ** ((q - p) % n * 1.0) / vals) / n
    entry = total.real * link_length / math.sin(math.pi / m) ** 2
    return float(entry)
