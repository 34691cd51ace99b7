"""Command-line front end.

Subcommands::

    forward    spec file -> invariant table (JSON)
    invert     table file -> recovered boundary data + spec file
    roundtrip  forward then invert, report the worst relative error
    verify     built-in identity suites, residuals as JSON or CSV
    badset     exceptional Floquet parameters and the factorization check
    graphs     the diagram census per order, with symmetry factors

Exit codes: 0 success, 1 failure (bad input, failed verification),
2 obstruction (a named precondition of the inverse theory is violated).
All machine output is byte-stable for fixed inputs and seed: JSON with
sorted keys, CSV with a fixed column order.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import (
    BoundaryArc,
    DomainSpec,
    ObstructionError,
    genericity_check,
    parse_spec,
    write_spec,
)
from .feynman import (
    SPProblem,
    automorphism_order,
    enumerate_graphs,
    full_expansion,
    oscillatory_quadrature,
    sp_coefficient_diagrams,
    sp_coefficient_direct,
)
from .hessian import (
    CirculantHessian,
    badset_report,
    hessian_matrix,
    inverse_matrix,
)
from .billiard import find_orbit, poincare_numeric, snell_residual
from .invariants import (
    InvariantTable,
    build_principal,
    forward_table,
    principal_leading_value,
)
from .inverse import convex_representative, recover
from .jets import MultiJet, extract_partial

_MODES = {"top": "TopOnly", "full": "FullPrincipal"}

# catalog size explodes past order four; the dump is for inspection, not
# for stress-testing the enumerator
_GRAPH_ORDER_CAP = 4


@dataclass(frozen=True)
class RunConfig:
    """Everything one invocation needs, resolved from the parsed arguments."""

    command: str
    input_path: Path | None = None
    out_path: Path | None = None
    r_max: int = 3
    j_max: int | None = None
    mode: str = "top"
    tol: float | None = None
    seed: int = 0
    strict: bool = False
    symmetry_class: str | None = None
    suites: tuple[str, ...] = ()

    def require_input(self) -> Path:
        if self.input_path is None or not self.input_path.is_file():
            raise ValueError(f"input file not found: {self.input_path}")
        return self.input_path


def _dump_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row.get(c, "") for c in columns})
    return buffer.getvalue()


_FLAG_NAMES = (
    ("bad Floquet", "bad-floquet"),
    ("cubic vanishes", "vanishing-cubic"),
    ("degenerate orbit", "degenerate-orbit"),
)


def _flag_obstruction_name(flag: str) -> str:
    for prefix, name in _FLAG_NAMES:
        if flag.startswith(prefix):
            return name
    return "unsupported"


# ---------------------------------------------------------------------------
# forward / invert / roundtrip


def cmd_forward(cfg: RunConfig) -> int:
    spec = parse_spec(cfg.require_input().read_text(encoding="utf-8"))
    report = genericity_check(spec)
    if report.flags and cfg.strict:
        raise ObstructionError(_flag_obstruction_name(report.flags[0]), report.flags[0])
    for flag in report.flags:
        print(f"warning: {flag}", file=sys.stderr)
    j_max = 3 if cfg.j_max is None else cfg.j_max
    table = forward_table(spec, cfg.r_max, j_max, normalization=_MODES[cfg.mode])
    _emit(_dump_json(table.to_json()), cfg.out_path)
    return 0


def _spec_from_recovery(symmetry_class: str, L: float, taylor: dict[int, float]) -> DomainSpec:
    """Reassemble a spec whose forward table reproduces the recovery.

    Two-arc data arrive in the convex-representative convention (negated
    top arc); dihedral data are already in the chart convention.
    """
    order = max(taylor)
    if symmetry_class.startswith("dihedral-"):
        m = int(symmetry_class.split("-", 1)[1])
        c0 = L / (m * math.sin(math.pi / m))
        coeffs = [c0, 0.0] + [
            taylor.get(k, 0.0) / math.factorial(k) for k in range(2, order + 1)
        ]
        return DomainSpec("dihedral", L, BoundaryArc(tuple(coeffs)), m=m)
    coeffs = [L / 2.0, 0.0] + [
        -taylor.get(k, 0.0) / math.factorial(k) for k in range(2, order + 1)
    ]
    return DomainSpec("updown", L, BoundaryArc(tuple(coeffs)))


def cmd_invert(cfg: RunConfig) -> int:
    table = InvariantTable.from_json(
        json.loads(cfg.require_input().read_text(encoding="utf-8"))
    )
    if cfg.symmetry_class is not None:
        table = dataclasses.replace(table, symmetry_class=cfg.symmetry_class)
    j_max = max(j for (_, j) in table.entries) if cfg.j_max is None else cfg.j_max
    result = recover(table, j_max)
    spec = _spec_from_recovery(table.symmetry_class, table.length, result.taylor)
    payload = {
        "class": table.symmetry_class,
        "report": result.to_json(),
        "spec": json.loads(write_spec(spec)),
    }
    sys.stdout.write(_dump_json(payload))
    if cfg.out_path is not None:
        cfg.out_path.write_text(write_spec(spec) + "\n", encoding="utf-8")
    return 0


def _expected_taylor(spec: DomainSpec, order: int) -> dict[int, float]:
    if spec.kind == "dihedral":
        return {
            k: (spec.f.derivative(k) if k % 2 == 0 else 0.0)
            for k in range(2, order + 1)
        }
    return convex_representative(spec, order)


def cmd_roundtrip(cfg: RunConfig) -> int:
    spec = parse_spec(cfg.require_input().read_text(encoding="utf-8"))
    j_max = 3 if cfg.j_max is None else cfg.j_max
    tol = 1e-8 if cfg.tol is None else cfg.tol
    table = forward_table(spec, cfg.r_max, j_max, normalization=_MODES[cfg.mode])
    result = recover(table, j_max)
    want = _expected_taylor(spec, 2 * j_max)
    rows = []
    for k in sorted(want):
        got = result.taylor.get(k, 0.0)
        rows.append(
            {
                "order": k,
                "recovered": got,
                "expected": want[k],
                "rel_error": abs(got - want[k]) / max(abs(want[k]), 1.0),
            }
        )
    worst = max(row["rel_error"] for row in rows)
    payload = {
        "class": table.symmetry_class,
        "max_rel_error": worst,
        "orders": rows,
        "status": "pass" if worst <= tol else "fail",
        "tolerance": tol,
    }
    if cfg.out_path is not None and cfg.out_path.suffix == ".csv":
        _emit(
            _rows_to_csv(rows, ["order", "recovered", "expected", "rel_error"]),
            cfg.out_path,
        )
    else:
        _emit(_dump_json(payload), cfg.out_path)
    return 0 if worst <= tol else 1


# ---------------------------------------------------------------------------
# verify suites: each returns rows {check, residual, tolerance}


def _suite_circulant(rng: np.random.Generator) -> list[dict]:
    rows = []
    for r in (1, 2, 3, 5, 8, 13, 25):
        worst_cheb = worst_dense = 0.0
        drawn = 0
        while drawn < 8:
            a = float(rng.uniform(-5.0, 5.0))
            h = CirculantHessian(r=r, L=1.3, a=a, b=a)
            try:
                fourier = inverse_matrix(h, method="fourier")
                cheb = inverse_matrix(h, method="chebyshev")
            except ObstructionError:
                continue
            drawn += 1
            dense = np.linalg.inv(hessian_matrix(h))
            scale = np.abs(fourier).max()
            worst_cheb = max(worst_cheb, np.abs(fourier - cheb).max() / scale)
            worst_dense = max(worst_dense, np.abs(fourier - dense).max() / scale)
        rows.append(
            {"check": f"fourier-vs-chebyshev r={r}", "residual": worst_cheb,
             "tolerance": 1e-9}
        )
        rows.append(
            {"check": f"fourier-vs-dense r={r}", "residual": worst_dense,
             "tolerance": 1e-9}
        )
    return rows


def _poincare_fixture() -> DomainSpec:
    L = 0.9
    return DomainSpec(
        "twoarc",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.17, 0.09), half_width=4.0),
        BoundaryArc((-L / 2, 0.0, 0.22, -0.26, 0.05), half_width=4.0),
    )


def _suite_poincare(rng: np.random.Generator) -> list[dict]:
    spec = _poincare_fixture()
    rows = []
    for r in (1, 2, 3):
        orbit = find_orbit(spec, r, np.zeros(2 * r))
        pdata = poincare_numeric(spec, orbit)
        lhs = float(np.linalg.det(np.eye(2) - pdata.matrix))
        h = CirculantHessian.from_spec(spec, r)
        rhs = -spec.L ** (2 * r) * float(np.linalg.det(hessian_matrix(h)))
        rows.append(
            {"check": f"det-poincare r={r}",
             "residual": abs(lhs - rhs) / abs(rhs), "tolerance": 1e-6}
        )
        rows.append(
            {"check": f"snell r={r}", "residual": snell_residual(spec, orbit),
             "tolerance": 1e-10}
        )
    return rows


def _random_sp_problem(rng: np.random.Generator, n: int, deg: int = 8) -> SPProblem:
    m = rng.normal(size=(n, n))
    hess = m @ m.T + n * np.eye(n)
    terms = {}
    for u in range(n):
        for v in range(u, n):
            alpha = [0] * n
            alpha[u] += 1
            alpha[v] += 1
            terms[tuple(alpha)] = hess[u, v] * (0.5 if u == v else 1.0)
    phase = MultiJet.from_terms(terms, n, deg)
    aterms = {(0,) * n: 1.0 + 0.5j}
    for alpha in itertools.product(range(deg + 1), repeat=n):
        degree = sum(alpha)
        if 3 <= degree <= deg and rng.random() < 0.4:
            phase = phase + MultiJet.from_terms({alpha: 0.2 * rng.normal()}, n, deg)
        if 0 < degree <= deg - 2 and rng.random() < 0.4:
            aterms[alpha] = rng.normal() + 1j * rng.normal()
    return SPProblem.from_phase(phase, MultiJet.from_terms(aterms, n, deg))


def _suite_feynman(rng: np.random.Generator) -> list[dict]:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        j = int(rng.integers(1, 4))
        problem = _random_sp_problem(rng, n)
        lhs = sp_coefficient_diagrams(problem, j)
        rhs = sp_coefficient_direct(problem, j)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-30))
    return [
        {"check": "diagram-sum vs operator (20 problems)", "residual": worst,
         "tolerance": 1e-9}
    ]


def _suite_amplitude(rng: np.random.Generator) -> list[dict]:
    L = 0.9  # like the orbit fixture, but with jets deep enough to shift
    spec = DomainSpec(
        "twoarc",
        L,
        BoundaryArc((L / 2, 0.0, -0.31, 0.17, 0.09, -0.04, 0.02)),
        BoundaryArc((-L / 2, 0.0, 0.22, -0.26, 0.05, 0.03, -0.01)),
    )
    arcs = (spec.upper, spec.lower)
    grad = lead = third = mixed = 0.0
    for r in (1, 2, 3):
        term = build_principal(spec, r, 4)
        grad = max(
            grad,
            np.abs(term.phase_jets.gradient_at_zero()).max(),
            np.abs(term.amplitude_jets.gradient_at_zero()).max(),
        )
        expect = principal_leading_value(r, spec.L)
        lead = max(lead, abs(term.amplitude_jets.value - expect) / abs(expect))
        n = 2 * r
        for p in range(n):
            sign = 1.0 if p % 2 == 0 else -1.0
            alpha = [0] * n
            alpha[p] = 3
            got = extract_partial(term.phase_jets, alpha)
            want = 2.0 * sign * arcs[p % 2].derivative(3)
            third = max(third, abs(got - want))
            for q in range(n):
                if q != p:
                    alpha = [0] * n
                    alpha[p], alpha[q] = 2, 1
                    mixed = max(mixed, abs(extract_partial(term.phase_jets, alpha)))
    base = build_principal(spec, 1, 4).amplitude_jets
    moved_spec = dataclasses.replace(
        spec, f=spec.f.with_derivative(5, spec.f.derivative(5) + 0.7)
    )
    freedom = np.abs(
        base.coeffs - build_principal(moved_spec, 1, 4).amplitude_jets.coeffs
    ).max()
    return [
        {"check": "critical-point gradients", "residual": grad, "tolerance": 1e-11},
        {"check": "leading amplitude value", "residual": lead, "tolerance": 1e-11},
        {"check": "pure third phase derivative", "residual": third, "tolerance": 1e-11},
        {"check": "mixed third phase derivatives", "residual": mixed, "tolerance": 1e-11},
        {"check": "low amplitude jet free of higher data", "residual": freedom,
         "tolerance": 1e-12},
    ]


def _suite_decay(rng: np.random.Generator) -> list[dict]:
    # cubic-perturbed Gaussian with analytic amplitude on a wide window
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
    rows = []
    for j_cap in (0, 1, 2):
        errors = [abs(quads[k] - full_expansion(problem, k, j_cap)) for k in ks]
        predicted = 2.0 ** -(j_cap + 1.5)
        ratios = [errors[i + 1] / errors[i] for i in range(len(ks) - 1)]
        residual = max(abs(rat / predicted - 1.0) for rat in ratios)
        rows.append(
            {"check": f"error halving rate J={j_cap}", "residual": residual,
             "tolerance": 0.25}
        )
    return rows


_SUITES = {
    "circulant": _suite_circulant,
    "poincare": _suite_poincare,
    "feynman": _suite_feynman,
    "amplitude": _suite_amplitude,
    "decay": _suite_decay,
}


def cmd_verify(cfg: RunConfig) -> int:
    names = cfg.suites or tuple(sorted(_SUITES))
    unknown = [n for n in names if n not in _SUITES]
    if unknown:
        raise ValueError(
            f"unknown suite(s) {unknown}; available: {sorted(_SUITES)}"
        )
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for name in names:
        for row in _SUITES[name](rng):
            tol = cfg.tol if cfg.tol is not None else row["tolerance"]
            status = "pass" if row["residual"] <= tol else "fail"
            rows.append({"suite": name, **row, "tolerance": tol, "status": status})
    for row in rows:
        print(
            f"{row['status'].upper():4} {row['suite']}: {row['check']} "
            f"(residual {row['residual']:.3e}, tol {row['tolerance']:g})"
        )
    failed = sum(row["status"] == "fail" for row in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    if cfg.out_path is not None:
        if cfg.out_path.suffix == ".csv":
            text = _rows_to_csv(
                rows, ["suite", "check", "residual", "tolerance", "status"]
            )
        else:
            text = _dump_json({"seed": cfg.seed, "checks": rows})
        cfg.out_path.write_text(text, encoding="utf-8")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# dumps


def cmd_badset(cfg: RunConfig) -> int:
    _emit(_dump_json(badset_report()), cfg.out_path)
    return 0


def cmd_graphs(cfg: RunConfig) -> int:
    j_max = 2 if cfg.j_max is None else cfg.j_max
    if not 1 <= j_max <= _GRAPH_ORDER_CAP:
        raise ValueError(f"graph catalog supports 1 <= j <= {_GRAPH_ORDER_CAP}")
    catalog = []
    for j in range(1, j_max + 1):
        graphs = enumerate_graphs(j)
        catalog.append(
            {
                "order": j,
                "count": len(graphs),
                "graphs": [
                    {**g.to_json(), "symmetry_factor": automorphism_order(g)}
                    for g in graphs
                ],
            }
        )
    _emit(_dump_json(catalog), cfg.out_path)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavetrace",
        description="Wave-invariant tables of bouncing-ball orbits: "
        "forward computation, inversion, and identity checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, r=False, j=False, mode=False, tol=False, seed=False):
        if r:
            p.add_argument("--r-max", type=int, default=3,
                           help="largest orbit iterate (default 3)")
        if j:
            p.add_argument("--j-max", type=int, default=None,
                           help="largest invariant order")
        if mode:
            p.add_argument("--mode", choices=("top", "full"), default="top",
                           help="top: closed forms; full: diagram sums")
        if tol:
            p.add_argument("--tol", type=float, default=None,
                           help="tolerance override")
        if seed:
            p.add_argument("--seed", type=int, default=0,
                           help="seed for the randomized checks")
        p.add_argument("--out", type=Path, default=None,
                       help="write the payload here instead of stdout")

    p = sub.add_parser("forward", help="spec file -> invariant table")
    p.add_argument("spec_file", type=Path)
    p.add_argument("--strict", action="store_true",
                   help="treat genericity flags as errors (exit 2)")
    add_common(p, r=True, j=True, mode=True)

    p = sub.add_parser("invert", help="invariant table -> boundary data")
    p.add_argument("table_file", type=Path)
    p.add_argument("--class", dest="symmetry_class", default=None,
                   help="override the table's symmetry class")
    add_common(p, j=True, tol=True)

    p = sub.add_parser("roundtrip", help="forward then invert a spec file")
    p.add_argument("spec_file", type=Path)
    add_common(p, r=True, j=True, mode=True, tol=True)

    p = sub.add_parser("verify", help="run the identity suites")
    p.add_argument("suites", nargs="*", metavar="suite",
                   help=f"subset of {sorted(_SUITES)} (default: all)")
    add_common(p, tol=True, seed=True)

    p = sub.add_parser("badset", help="exceptional Floquet parameters")
    add_common(p)

    p = sub.add_parser("graphs", help="diagram census per order")
    add_common(p, j=True)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "spec_file", None) or getattr(args, "table_file", None),
        out_path=args.out,
        r_max=getattr(args, "r_max", 3),
        j_max=getattr(args, "j_max", None),
        mode=getattr(args, "mode", "top"),
        tol=getattr(args, "tol", None),
        seed=getattr(args, "seed", 0),
        strict=getattr(args, "strict", False),
        symmetry_class=getattr(args, "symmetry_class", None),
        suites=tuple(getattr(args, "suites", ())),
    )


_COMMANDS = {
    "forward": cmd_forward,
    "invert": cmd_invert,
    "roundtrip": cmd_roundtrip,
    "verify": cmd_verify,
    "badset": cmd_badset,
    "graphs": cmd_graphs,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = _config_from_args(args)
    try:
        return _COMMANDS[cfg.command](cfg)
    except ObstructionError as exc:
        detail = str(exc).removeprefix(f"{exc.name}: ")
        print(f"obstruction[{exc.name}]: {detail}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
