"""End-to-end checks of the command-line front end."""

from __future__ import annotations

import json
import math

import pytest

from wavetrace.cli import main
from wavetrace.domain import parse_spec
from wavetrace.invariants import InvariantTable, forward_table

UPDOWN = {
    "kind": "updown",
    "L": 2.0,
    "f": [1.0, 0.0, -0.31, 0.12, 0.05, -0.033, 0.021, 0.011, -0.017, 0.009, 0.004],
}


def write_updown(tmp_path, name="spec.json", payload=UPDOWN):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def dihedral_payload(m=3, L=3.0):
    c0 = L / (m * math.sin(math.pi / m))
    return {
        "kind": "dihedral",
        "L": L,
        "m": m,
        "f": [c0, 0.0, 0.21, 0.0, -0.09, 0.0, 0.04, 0.0, 0.013, 0.0, -0.006],
    }


# ---------------------------------------------------------------------------
# forward


def test_forward_writes_the_table(tmp_path):
    spec_file = write_updown(tmp_path)
    out = tmp_path / "table.json"
    rc = main(["forward", str(spec_file), "--r-max", "2", "--j-max", "3",
               "--out", str(out)])
    assert rc == 0
    blob = json.loads(out.read_text())
    assert set(blob) == {"L", "a", "class", "normalization", "entries"}
    assert blob["class"] == "updown"
    assert len(blob["entries"]) == 6
    table = InvariantTable.from_json(blob)
    spec = parse_spec(spec_file.read_text())
    assert table.entries == forward_table(spec, 2, 3).entries


def test_forward_strict_flags_exceptional_floquet(tmp_path, capsys):
    bad = dict(UPDOWN, f=[1.0, 0.0, -0.25, 0.12, 0.05])  # lands on a = 0
    spec_file = write_updown(tmp_path, payload=bad)
    assert main(["forward", str(spec_file), "--strict"]) == 2
    assert "obstruction[" in capsys.readouterr().err
    # without --strict the table is still produced, with warnings
    out = tmp_path / "t.json"
    assert main(["forward", str(spec_file), "--r-max", "1", "--j-max", "1",
                 "--out", str(out)]) == 0
    assert "warning" in capsys.readouterr().err
    assert out.is_file()


def test_forward_missing_file(tmp_path, capsys):
    assert main(["forward", str(tmp_path / "nope.json")]) == 1
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# invert / roundtrip


def test_invert_emits_report_and_spec(tmp_path, capsys):
    spec_file = write_updown(tmp_path)
    table_file = tmp_path / "table.json"
    main(["forward", str(spec_file), "--r-max", "3", "--j-max", "4",
          "--out", str(table_file)])
    rec_file = tmp_path / "recovered.json"
    rc = main(["invert", str(table_file), "--j-max", "4", "--out", str(rec_file)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"class", "report", "spec"}
    assert report["report"]["taylor"]["2"] == pytest.approx(0.62, rel=1e-12)
    # the emitted spec reproduces the table it came from
    recovered = parse_spec(rec_file.read_text())
    original = forward_table(parse_spec(spec_file.read_text()), 3, 4)
    again = forward_table(recovered, 3, 4)
    for key, value in original.entries.items():
        assert again.entries[key] == pytest.approx(value, rel=1e-9)


def test_invert_class_override_can_fail_loudly(tmp_path, capsys):
    spec_file = write_updown(tmp_path)
    table_file = tmp_path / "table.json"
    main(["forward", str(spec_file), "--out", str(table_file)])
    rc = main(["invert", str(table_file), "--class", "twoarc"])
    assert rc == 2
    assert "obstruction[unsupported]" in capsys.readouterr().err


def test_roundtrip_passes_and_fails_by_tolerance(tmp_path, capsys):
    spec_file = write_updown(tmp_path)
    assert main(["roundtrip", str(spec_file), "--r-max", "3", "--j-max", "5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["status"] == "pass"
    assert payload["max_rel_error"] <= 1e-12
    assert main(["roundtrip", str(spec_file), "--r-max", "3", "--j-max", "5",
                 "--tol", "1e-18"]) == 1


def test_roundtrip_dihedral_csv(tmp_path):
    spec_file = write_updown(tmp_path, payload=dihedral_payload())
    out = tmp_path / "report.csv"
    rc = main(["roundtrip", str(spec_file), "--r-max", "2", "--j-max", "4",
               "--out", str(out)])
    assert rc == 0
    header, *rows = out.read_text().splitlines()
    assert header == "order,recovered,expected,rel_error"
    assert len(rows) == 7  # orders 2..8


def test_roundtrip_full_mode(tmp_path, capsys):
    spec_file = write_updown(tmp_path)
    rc = main(["roundtrip", str(spec_file), "--r-max", "2", "--j-max", "2",
               "--mode", "full"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["status"] == "pass"


# ---------------------------------------------------------------------------
# verify


def test_verify_selected_suites(tmp_path, capsys):
    out = tmp_path / "checks.csv"
    rc = main(["verify", "poincare", "amplitude", "--seed", "5",
               "--out", str(out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "PASS poincare: det-poincare r=1" in stdout
    assert "checks passed" in stdout
    header, *rows = out.read_text().splitlines()
    assert header == "suite,check,residual,tolerance,status"
    assert all(row.endswith(",pass") for row in rows)


def test_verify_is_byte_stable(tmp_path, capsys):
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    main(["verify", "feynman", "--seed", "9", "--out", str(first)])
    main(["verify", "feynman", "--seed", "9", "--out", str(second)])
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()


def test_verify_tolerance_override_forces_failure(capsys):
    rc = main(["verify", "poincare", "--tol", "1e-30"])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_unknown_suite(capsys):
    assert main(["verify", "nonsense"]) == 1
    assert "unknown suite" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# dumps


def test_badset_dump(capsys):
    assert main(["badset"]) == 0
    blob = json.loads(capsys.readouterr().out)
    assert blob["roots"] == [-2.0, -1.0, 0.0, 2.0]
    assert blob["factorization_residual"] <= 1e-10


def test_graphs_dump_counts_and_cap(tmp_path, capsys):
    out = tmp_path / "census.json"
    assert main(["graphs", "--j-max", "2", "--out", str(out)]) == 0
    catalog = json.loads(out.read_text())
    assert [(row["order"], row["count"]) for row in catalog] == [(1, 5), (2, 41)]
    assert all("symmetry_factor" in g for row in catalog for g in row["graphs"])
    assert main(["graphs", "--j-max", "9"]) == 1
    assert "catalog supports" in capsys.readouterr().err


def test_usage_error_exits_via_argparse():
    with pytest.raises(SystemExit):
        main([])
