"""Stationary-phase expansions evaluated two ways: operator route and graphs.

The expansion of an oscillatory integral with a nondegenerate critical point
is computed both by iterated application of the inverse-Hessian second-order
operator to ``amplitude * (cubic remainder)**mu`` and by summing Feynman-type
multigraph amplitudes weighted by inverse automorphism counts.  Keeping the
two routes separate (and testable against each other) is the point; do not
collapse them.

Graph model: a single distinguished *open* vertex carries the amplitude; any
number of *closed* vertices carry the phase remainder.  Edges are unoriented
and may be loops (at either kind of vertex), parallel bundles between closed
vertices, or bundles between a closed vertex and the open one ("stubs").
A graph with ``V`` closed vertices and ``I`` total edges contributes at order
``I - V`` in inverse powers of the large parameter, i.e. carries ``k**(V-I)``.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.integrate

from .jets import MultiJet, derivative_tensor, jet_mul

__all__ = [
    "FeynmanGraph",
    "SPProblem",
    "amplitude",
    "automorphism_order",
    "enumerate_graphs",
    "full_expansion",
    "max_derivative_report",
    "oscillatory_quadrature",
    "sp_coefficient_diagrams",
    "sp_coefficient_direct",
]

# i**m and i**(-m) without trig roundoff
_IPOW = (1 + 0j, 1j, -1 + 0j, -1j)


def _i_power(m: int) -> complex:
    return _IPOW[m % 4]


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class FeynmanGraph:
    """Isomorphism-class representative of a contraction multigraph.

    Attributes:
        closed_vertices: per closed vertex, a ``(loops, stubs)`` pair; loops
            are edges from the vertex to itself, stubs are edges from the
            vertex to the open vertex.
        open_loops: number of loops at the open vertex.
        edges_between: symmetric ``V x V`` multiplicity table (zero diagonal)
            of edges between distinct closed vertices.
    """

    closed_vertices: tuple[tuple[int, int], ...]
    open_loops: int
    edges_between: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        v = len(self.closed_vertices)
        adj = self.edges_between
        if len(adj) != v or any(len(row) != v for row in adj):
            raise ValueError(f"edges_between must be {v}x{v}")
        for i in range(v):
            if adj[i][i] != 0:
                raise ValueError("edges_between diagonal must be zero (loops are stored per vertex)")
            for j in range(v):
                if adj[i][j] != adj[j][i]:
                    raise ValueError("edges_between must be symmetric")
                if adj[i][j] < 0:
                    raise ValueError("edge multiplicities must be non-negative")
        if self.open_loops < 0:
            raise ValueError("open_loops must be non-negative")
        for loops, stubs in self.closed_vertices:
            if loops < 0 or stubs < 0:
                raise ValueError("loop and stub counts must be non-negative")

    # -- counting ------------------------------------------------------------

    @property
    def num_closed(self) -> int:
        return len(self.closed_vertices)

    @property
    def num_edges(self) -> int:
        v = self.num_closed
        internal = sum(self.edges_between[i][j] for i in range(v) for j in range(i + 1, v))
        self_edges = sum(l + s for l, s in self.closed_vertices)
        return internal + self_edges + self.open_loops

    @property
    def order(self) -> int:
        """Inverse power of the large parameter carried by this graph."""
        return self.num_edges - self.num_closed

    @property
    def k_power(self) -> int:
        return -self.order

    @property
    def open_vertex_valence(self) -> int:
        return 2 * self.open_loops + sum(s for _, s in self.closed_vertices)

    def valence(self, v: int) -> int:
        loops, stubs = self.closed_vertices[v]
        return 2 * loops + stubs + sum(self.edges_between[v])

    @property
    def is_empty(self) -> bool:
        return self.num_closed == 0 and self.num_edges == 0

    # -- normal form -----------------------------------------------------------

    def _encode(self, perm: Sequence[int]) -> tuple:
        recs = tuple(self.closed_vertices[p] for p in perm)
        adj = tuple(
            self.edges_between[perm[i]][perm[j]]
            for i in range(len(perm))
            for j in range(i + 1, len(perm))
        )
        return (len(perm), self.open_loops, recs, adj)

    def sort_key(self) -> tuple:
        return self.canonical()._encode(range(self.num_closed))

    def canonical(self) -> "FeynmanGraph":
        """Relabel closed vertices into a canonical order.

        Vertices are first partitioned by iterated neighbourhood refinement;
        the representative is the minimum encoding over all orderings that
        sort the partition classes (isomorphic graphs share this minimum).
        """
        v = self.num_closed
        if v == 0:
            return self
        colors = _refine_colors(self.closed_vertices, self.edges_between)
        groups: dict[int, list[int]] = {}
        for idx, c in enumerate(colors):
            groups.setdefault(c, []).append(idx)
        blocks = [groups[c] for c in sorted(groups)]
        best = None
        for perm in _block_permutations(blocks):
            key = self._encode(perm)
            if best is None or key < best[0]:
                best = (key, perm)
        _, perm = best
        recs = tuple(self.closed_vertices[p] for p in perm)
        adj = tuple(tuple(self.edges_between[p][q] for q in perm) for p in perm)
        return FeynmanGraph(recs, self.open_loops, adj)

    def to_json(self) -> dict:
        return {
            "closed_vertices": [list(r) for r in self.closed_vertices],
            "open_loops": self.open_loops,
            "edges_between": [list(row) for row in self.edges_between],
            "order": self.order,
            "automorphisms": automorphism_order(self),
        }


def _refine_colors(records, adj) -> list[int]:
    """Iterated partition refinement by loop/stub counts and neighbourhoods."""
    v = len(records)
    ranks = {r: i for i, r in enumerate(sorted(set(records)))}
    colors = [ranks[r] for r in records]
    while True:
        sigs = []
        for i in range(v):
            nbrs = tuple(sorted((adj[i][j], colors[j]) for j in range(v) if adj[i][j]))
            sigs.append((colors[i], nbrs))
        ranks = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(set(new)) == len(set(colors)):
            return new
        colors = new


def _block_permutations(blocks):
    """All vertex orderings obtained by permuting within each colour block."""
    pools = [itertools.permutations(b) for b in blocks]
    for combo in itertools.product(*pools):
        yield tuple(itertools.chain.from_iterable(combo))


def automorphism_order(graph: FeynmanGraph) -> int:
    """Order of the automorphism group (the open vertex is kept fixed).

    Counts vertex permutations preserving the labelled structure, times the
    internal symmetries of the edge set: each loop can swap its two ends,
    loops at one vertex permute among themselves, and every parallel bundle
    (including stubs and open loops) permutes freely.
    """
    v = graph.num_closed
    factor = 2**graph.open_loops * math.factorial(graph.open_loops)
    for loops, stubs in graph.closed_vertices:
        factor *= 2**loops * math.factorial(loops) * math.factorial(stubs)
    for i in range(v):
        for j in range(i + 1, v):
            factor *= math.factorial(graph.edges_between[i][j])
    colors = _refine_colors(graph.closed_vertices, graph.edges_between)
    groups: dict[int, list[int]] = {}
    for idx, c in enumerate(colors):
        groups.setdefault(c, []).append(idx)
    blocks = [groups[c] for c in sorted(groups)]
    vertex_perms = 0
    ident = graph._encode(range(v))
    for arrangements in itertools.product(*[itertools.permutations(b) for b in blocks]):
        perm = [0] * v
        for block, arrangement in zip(blocks, arrangements):
            for pos, target in zip(block, arrangement):
                perm[pos] = target
        if graph._encode(perm) == ident:
            vertex_perms += 1
    return vertex_perms * factor


def _self_assignments(v: int, budget: int):
    """Non-increasing length-v tuples of (loops, stubs) with total <= budget."""
    pairs = [(l, s) for tot in range(budget + 1) for l in range(tot + 1) for s in [tot - l]]
    pairs.sort(reverse=True)

    def rec(idx, remaining, start):
        if idx == v:
            yield ()
            return
        for p in range(start, len(pairs)):
            l, s = pairs[p]
            if l + s > remaining:
                continue
            for rest in rec(idx + 1, remaining - l - s, p):
                yield ((l, s),) + rest

    yield from rec(0, budget, 0)


def _degree_sequences(needs, records, total):
    """Degree tuples >= needs summing to total, non-increasing on equal records."""

    def rec(idx, remaining):
        if idx == len(needs):
            if remaining == 0:
                yield ()
            return
        lo = needs[idx]
        hi = remaining - sum(needs[idx + 1 :])
        for d in range(lo, hi + 1):
            for rest in rec(idx + 1, remaining - d):
                if rest and records[idx + 1] == records[idx] and rest[0] > d:
                    continue
                yield (d,) + rest

    yield from rec(0, total)


def _realizations(degrees):
    """All symmetric non-negative integer tables with zero diagonal and the
    given row sums (labelled loopless multigraphs on this degree sequence)."""
    v = len(degrees)
    res = list(degrees)
    adj = [[0] * v for _ in range(v)]
    out = []

    def rec(u, w):
        if u == v:
            out.append(tuple(tuple(row) for row in adj))
            return
        if w == v:
            if res[u] == 0:
                rec(u + 1, u + 2)
            return
        if res[u] > sum(res[w:]):
            return
        top = min(res[u], res[w])
        for m in range(top, -1, -1):
            adj[u][w] = adj[w][u] = m
            res[u] -= m
            res[w] -= m
            rec(u, w + 1)
            res[u] += m
            res[w] += m
        adj[u][w] = adj[w][u] = 0

    rec(0, 1)
    return out


@lru_cache(maxsize=None)
def enumerate_graphs(order: int) -> tuple[FeynmanGraph, ...]:
    """All isomorphism classes of contraction graphs at the given order.

    Every closed vertex must have valence >= 3; disconnected graphs are
    included.  At order 0 the only class is the empty graph.  Enumeration
    beyond order 3 works but slows down sharply; keep interactive use at
    ``order <= 4``.

    Raises:
        ValueError: on a negative order.
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    seen: dict[tuple, FeynmanGraph] = {}
    for open_loops in range(order + 1):
        budget = order - open_loops
        for v in range(2 * budget + 1):
            total = budget + v  # loops + stubs + internal edges
            if v == 0:
                if total == 0:
                    g = FeynmanGraph((), open_loops, ())
                    seen.setdefault(g.sort_key(), g)
                continue
            for recs in _self_assignments(v, total):
                edge_budget = total - sum(l + s for l, s in recs)
                if v == 1 and edge_budget > 0:
                    continue
                needs = [max(0, 3 - 2 * l - s) for l, s in recs]
                if sum(needs) > 2 * edge_budget:
                    continue
                for degs in _degree_sequences(needs, recs, 2 * edge_budget):
                    for adj in _realizations(degs):
                        g = FeynmanGraph(recs, open_loops, adj).canonical()
                        seen.setdefault(g.sort_key(), g)
    return tuple(seen[k] for k in sorted(seen))


# ---------------------------------------------------------------------------
# stationary-phase problems


@dataclass(frozen=True, eq=False)
class SPProblem:
    """Local data of an oscillatory integral at a nondegenerate critical point.

    Attributes:
        num_vars: dimension of the integration variable.
        hessian_inverse: inverse of the phase Hessian at the critical point.
        phase_tensors: jet of the phase with its value, gradient and quadratic
            part removed (every stored coefficient has total degree >= 3).
        amplitude: jet of the amplitude at the critical point (may be complex).
        phase_value: phase at the critical point.
        signature: signature (n_plus - n_minus) of the phase Hessian.
    """

    num_vars: int
    hessian_inverse: np.ndarray
    phase_tensors: MultiJet
    amplitude: MultiJet
    phase_value: float
    signature: int

    def __post_init__(self):
        n = self.num_vars
        h = np.asarray(self.hessian_inverse, dtype=float)
        if h.shape != (n, n):
            raise ValueError(f"hessian_inverse must be {n}x{n}, got {h.shape}")
        if not np.allclose(h, h.T, atol=1e-12 * (1 + np.abs(h).max())):
            raise ValueError("hessian_inverse must be symmetric")
        object.__setattr__(self, "hessian_inverse", h)
        if self.phase_tensors.num_vars != n or self.amplitude.num_vars != n:
            raise ValueError("jet variable counts must match num_vars")
        if np.iscomplexobj(self.phase_tensors.coeffs):
            raise ValueError("phase jets must be real")
        low = self.phase_tensors.coeffs[self.phase_tensors._tab().degrees < 3]
        if low.size and np.any(low != 0.0):
            raise ValueError("phase_tensors must not carry terms of degree < 3")
        if abs(self.signature) > n or (self.signature - n) % 2 != 0:
            raise ValueError(f"signature {self.signature} impossible in dimension {n}")

    @staticmethod
    def from_phase(phase: MultiJet, amplitude: MultiJet, grad_tol: float = 1e-9) -> "SPProblem":
        """Split a full phase jet at a critical point into problem data.

        Raises:
            ValueError: if the gradient does not vanish or the Hessian is
                singular.
        """
        grad = phase.gradient_at_zero()
        if np.linalg.norm(grad, np.inf) > grad_tol:
            raise ValueError("phase gradient does not vanish: not a critical point")
        hess = phase.hessian_at_zero().real
        eig = np.linalg.eigvalsh(hess)
        if np.min(np.abs(eig)) < 1e-12 * max(1.0, np.max(np.abs(eig))):
            raise ValueError("phase Hessian is singular; expansion undefined")
        return SPProblem(
            num_vars=phase.num_vars,
            hessian_inverse=np.linalg.inv(hess),
            phase_tensors=phase.strip_below(3),
            amplitude=amplitude,
            phase_value=float(np.real(phase.value)),
            signature=int(np.sum(eig > 0) - np.sum(eig < 0)),
        )


def _require_jet_orders(problem: SPProblem, j: int):
    need_phase = 2 * j + 2
    need_amp = 2 * j
    if j > 0 and problem.phase_tensors.max_degree < need_phase:
        raise ValueError(
            f"order-{j} coefficient needs phase jets of degree >= {need_phase}, "
            f"got {problem.phase_tensors.max_degree}"
        )
    if problem.amplitude.max_degree < need_amp:
        raise ValueError(
            f"order-{j} coefficient needs amplitude jets of degree >= {need_amp}, "
            f"got {problem.amplitude.max_degree}"
        )


# ---------------------------------------------------------------------------
# graph route


def amplitude(graph: FeynmanGraph, problem: SPProblem) -> complex:
    """Contraction value of one graph (with the k-power stripped off).

    Sums, over all assignments of variable indices to edge ends, the product
    of an inverse-Hessian entry per edge, a phase-remainder partial of order
    ``valence(v)`` per closed vertex, and an amplitude partial of order equal
    to the open valence; the whole is multiplied by ``i**(edges + closed)``.

    Raises:
        ValueError: if a stored jet is too short for a required valence, or
            the graph needs more than 26 edges' worth of contraction symbols.
    """
    ends: list[tuple[int, int]] = []
    v = graph.num_closed
    open_slot = v
    for idx, (loops, stubs) in enumerate(graph.closed_vertices):
        ends.extend([(idx, idx)] * loops)
        ends.extend([(idx, open_slot)] * stubs)
    for i in range(v):
        for j in range(i + 1, v):
            ends.extend([(i, j)] * graph.edges_between[i][j])
    ends.extend([(open_slot, open_slot)] * graph.open_loops)
    n_edges = len(ends)
    if graph.is_empty and graph.open_vertex_valence == 0:
        return complex(problem.amplitude.value)
    if 2 * n_edges > len(string.ascii_letters):
        raise ValueError(f"graph needs {2 * n_edges} contraction symbols; 52 available")

    letters = string.ascii_letters
    slots: list[list[str]] = [[] for _ in range(v + 1)]
    subscripts = []
    operands = []
    for e, (p, q) in enumerate(ends):
        a, b = letters[2 * e], letters[2 * e + 1]
        subscripts.append(a + b)
        operands.append(problem.hessian_inverse)
        slots[p].append(a)
        slots[q].append(b)
    for idx in range(v):
        val = graph.valence(idx)
        subscripts.append("".join(slots[idx]))
        operands.append(derivative_tensor(problem.phase_tensors, val))
    open_val = graph.open_vertex_valence
    subscripts.append("".join(slots[open_slot]))
    operands.append(derivative_tensor(problem.amplitude, open_val))
    value = np.einsum(",".join(subscripts) + "->", *operands, optimize=True)
    return _i_power(n_edges + v) * complex(value)


def sp_coefficient_diagrams(problem: SPProblem, j: int) -> complex:
    """Order-j expansion coefficient as a sum over graph classes.

    Each class at order j contributes its contraction value divided by the
    order of its automorphism group.
    """
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    _require_jet_orders(problem, j)
    total = 0j
    for graph in enumerate_graphs(j):
        total += amplitude(graph, problem) / automorphism_order(graph)
    return total


# ---------------------------------------------------------------------------
# operator route


def _apply_inverse_hessian_operator(jet: MultiJet, h: np.ndarray) -> MultiJet:
    """One application of the second-order operator sum h[u,v] d_u d_v."""
    tab = jet._tab()
    out = np.zeros_like(jet.coeffs)
    n = jet.num_vars
    for u in range(n):
        for w in range(u, n):
            weight = h[u, u] if u == w else 2.0 * h[u, w]
            if weight == 0.0:
                continue
            src, dst, factor = tab.diff2_table(u, w)
            out[dst] += weight * (factor * jet.coeffs[src])
    return MultiJet(jet.num_vars, jet.max_degree, out)


def sp_coefficient_direct(problem: SPProblem, j: int) -> complex:
    """Order-j expansion coefficient by the operator route.

    Sums over ``mu = 0..2j`` (with ``nu = mu + j``) the value at 0 of
    ``nu`` applications of the inverse-Hessian second-order operator to
    ``amplitude * remainder**mu``, weighted by
    ``(-1)**nu * i**(-j) / (2**nu * mu! * nu!)``.

    Cost grows steeply with dimension (dense working jets of degree ``6j``);
    the graph route scales better for larger ``num_vars``.
    """
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    _require_jet_orders(problem, j)
    if j == 0:
        return complex(problem.amplitude.value)
    work_deg = 6 * j
    h = problem.hessian_inverse

    def at_work(jet: MultiJet) -> MultiJet:
        if jet.max_degree < work_deg:
            return jet.extended(work_deg)
        if jet.max_degree > work_deg:
            return jet.truncated(work_deg)
        return jet

    remainder = at_work(problem.phase_tensors)
    product = at_work(problem.amplitude)
    total = 0j
    for mu in range(0, 2 * j + 1):
        nu = mu + j
        if mu > 0:
            product = jet_mul(product, remainder, degree_cap=2 * mu + 2 * j)
        term = product
        for _ in range(nu):
            term = _apply_inverse_hessian_operator(term, h)
        coeff = (-1.0) ** nu * _i_power(-j) / (2**nu * math.factorial(mu) * math.factorial(nu))
        total += coeff * term.value
    return complex(total)


# ---------------------------------------------------------------------------
# assembled expansion and quadrature oracle


def full_expansion(problem: SPProblem, k: float, order_cap: int, method: str = "direct") -> complex:
    """Truncated stationary-phase value of the oscillatory integral.

    Multiplies the Gaussian prefactor
    ``(2 pi / k)**(n/2) * exp(i pi sgn / 4) / sqrt(|det H|) * exp(i k S(0))``
    by the coefficient series through order ``order_cap`` in ``1/k``.

    Args:
        problem: local data at the critical point.
        k: large positive parameter.
        order_cap: highest inverse power retained.
        method: "direct" (operator route) or "diagrams".
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    if method not in ("direct", "diagrams"):
        raise ValueError(f"unknown method {method!r}")
    coeff_fn = sp_coefficient_direct if method == "direct" else sp_coefficient_diagrams
    n = problem.num_vars
    det_h = np.linalg.det(problem.hessian_inverse)
    prefactor = (
        (2.0 * np.pi / k) ** (n / 2.0)
        * np.exp(1j * np.pi * problem.signature / 4.0)
        * np.sqrt(abs(det_h))
        * np.exp(1j * k * problem.phase_value)
    )
    series = sum(coeff_fn(problem, j) * k ** (-j) for j in range(order_cap + 1))
    return complex(prefactor * series)


def oscillatory_quadrature(
    phase: Callable,
    amp: Callable,
    k: float,
    lower,
    upper,
    limit: int = 800,
) -> tuple[complex, float]:
    """Adaptive quadrature of ``amp * exp(i k phase)`` over a box (dim <= 2).

    Scalar bounds integrate a single variable; length-2 bounds integrate a
    rectangle by nested quadrature (the reported error then covers only the
    outer integrals, which is good enough for an oracle).

    Returns:
        (value, error_estimate)
    """
    quad = scipy.integrate.quad
    try:
        bounds = list(zip(lower, upper))
    except TypeError:
        bounds = [(float(lower), float(upper))]
    if len(bounds) == 1:
        (lo, hi), = bounds
        re = quad(lambda x: np.real(amp(x) * np.exp(1j * k * phase(x))), lo, hi, limit=limit)
        im = quad(lambda x: np.imag(amp(x) * np.exp(1j * k * phase(x))), lo, hi, limit=limit)
        return re[0] + 1j * im[0], re[1] + im[1]
    if len(bounds) != 2:
        raise ValueError("quadrature supports one or two variables only")
    (lo0, hi0), (lo1, hi1) = bounds

    def nested(part):
        def inner(y):
            val = quad(
                lambda x: part(amp(x, y) * np.exp(1j * k * phase(x, y))),
                lo0,
                hi0,
                limit=limit,
            )
            return val[0]

        return quad(inner, lo1, hi1, limit=limit)

    re = nested(np.real)
    im = nested(np.imag)
    return re[0] + 1j * im[0], re[1] + im[1]


# ---------------------------------------------------------------------------
# top-derivative bookkeeping


def max_derivative_report(
    problem_factory: Callable[[float, float], SPProblem],
    j: int,
    shift: float = 1.0,
    tol: float = 1e-9,
) -> dict:
    """Which order-(j-1) graphs feel the two highest boundary derivatives.

    ``problem_factory(even_shift, odd_shift)`` must rebuild the problem with
    the highest even-order datum (order ``2j``) shifted by ``even_shift`` and
    the next one (order ``2j - 1``) shifted by ``odd_shift``; all jets must be
    reassembled from the shifted data.  Graph values are polynomials of degree
    at most two in either datum, so central differences give exact
    sensitivities.

    Returns:
        dict with the graph rows (value and both sensitivities) and the index
        lists of even and odd carriers.
    """
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    base = problem_factory(0.0, 0.0)
    plus_e = problem_factory(shift, 0.0)
    minus_e = problem_factory(-shift, 0.0)
    plus_o = problem_factory(0.0, shift)
    minus_o = problem_factory(0.0, -shift)
    rows = []
    for graph in enumerate_graphs(j - 1):
        value = amplitude(graph, base)
        sens_even = (amplitude(graph, plus_e) - amplitude(graph, minus_e)) / (2.0 * shift)
        sens_odd = (amplitude(graph, plus_o) - amplitude(graph, minus_o)) / (2.0 * shift)
        rows.append(
            {
                "graph": graph.to_json(),
                "value": value,
                "top_even_sensitivity": sens_even,
                "top_odd_sensitivity": sens_odd,
            }
        )
    scale_e = max([abs(r["top_even_sensitivity"]) for r in rows] + [1.0])
    scale_o = max([abs(r["top_odd_sensitivity"]) for r in rows] + [1.0])
    even_carriers = [
        i for i, r in enumerate(rows) if abs(r["top_even_sensitivity"]) > tol * scale_e
    ]
    odd_carriers = [
        i for i, r in enumerate(rows) if abs(r["top_odd_sensitivity"]) > tol * scale_o
    ]
    return {
        "order": j - 1,
        "rows": rows,
        "even_carriers": even_carriers,
        "odd_carriers": odd_carriers,
    }
