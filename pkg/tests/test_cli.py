from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdl import cli
from rdl.modq import instance_digest, load_instance


def run(*argv):
    code, doc = cli.run(list(argv))
    return code, doc["body"]


def test_identities_example():
    code, body = run("identities", "--q", "2", "--n", "1", "--m", "3", "--f", '{"kind":"uniform"}', "--seed", "7")
    assert code == 0 and body["passed"]
    names = {c["name"] for c in body["checks"]}
    assert {"psi_fourier", "w_fourier", "w_to_psi", "psi_to_w", "mean_weight", "pgm_agreement"} <= names


def test_end_to_end_example():
    code, body = run("end-to-end", "--n", "1", "--l", "1", "--seed", "1")
    assert code == 0
    assert body["results"]["mean_success"] == pytest.approx(1.0, abs=1e-9)


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2
    proc = subprocess.run([sys.executable, "-m", "rdl.cli", "bogus"], capture_output=True)
    assert proc.returncode == 2


def test_gen_instance(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    _, body = run("gen-instance", "--q", "4", "--n", "1", "--m", "9", "--seed", "42", "--out", str(a))
    run("gen-instance", "--q", "4", "--n", "1", "--m", "9", "--seed", "42", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    inst = load_instance(a)
    assert inst.A.entries.min() >= 0 and inst.A.entries.max() < 4
    assert body["results"]["digest"] == instance_digest(inst.A, inst.y)


def test_solve_and_recover_round_trip(tmp_path):
    path = tmp_path / "i.json"
    run("gen-instance", "--q", "2", "--n", "1", "--m", "3", "--seed", "1", "--out", str(path))
    inst = load_instance(path)
    if not inst.A.entries.any():
        pytest.skip("drew the zero matrix")
    code, body = run("solve", "--instance", str(path), "--tape", "2", "--seed", "0")
    assert code == 0 and not body["results"]["aborted"]
    x = ",".join(map(str, body["results"]["x_F"]))
    code, rbody = run("recover", "--instance", str(path), "--solution", x)
    assert code == 0 and rbody["results"]["tape_hex"] == "2"


def test_audit_and_abort_rate():
    code, body = run("audit-uniformity", "--n", "1", "--l", "1", "--exhaustive", "--seed", "0")
    assert code == 0
    assert body["results"]["epsilon_mean"] == pytest.approx(0.0, abs=1e-12)
    assert body["results"]["coverage"] == 1.0
    code, body = run("abort-rate", "--n", "1", "--l", "1", "--trials", "200", "--seed", "0")
    assert code == 0 and len(body["results"]["ci95"]) == 2


def test_forward_and_reverse(tmp_path):
    path = tmp_path / "i.json"
    run("gen-instance", "--q", "3", "--n", "1", "--m", "3", "--seed", "2", "--out", str(path))
    fam = tmp_path / "f.json"
    fam.write_text('{"kind": "gaussian", "sigma": 1.2}')
    for oracle in ("pgm", "biased"):
        code, body = run("forward", "--instance", str(path), "--f", str(fam), "--T", '{"kind":"linf","bound":1}',
                         "--oracle", oracle)
        assert code == 0, body
    code, body = run("reverse", "--instance", str(path), "--oracle", "perfect", "--f", str(fam))
    assert code == 0


def test_error_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"q": 4, "n": 1, "m": 2, "A": [[1, 9]]}')
    code, body = run("pgm", "--instance", str(bad), "--f", '{"kind":"uniform"}')
    assert code == cli.EXIT_CODES["invalid_input"]
    assert body["results"]["error"]["code"] == "invalid_input" and not body["passed"]
    code, body = run("pgm", "--instance", str(tmp_path / "missing.json"), "--f", '{"kind":"uniform"}')
    assert code == cli.EXIT_CODES["invalid_input"]
    code, body = run("identities", "--q", "4", "--n", "1", "--m", "6", "--f", '{"kind":"random"}', "--cap", "100")
    assert code == cli.EXIT_CODES["cap_exceeded"]
    assert body["results"]["error"]["code"] == "cap_exceeded"
    assert len(set(cli.EXIT_CODES.values())) == len(cli.EXIT_CODES)


def test_failed_check_exits_1(monkeypatch):
    def failing(args, rep):
        rep.check("always", 0.0, 1.0, ">=", 1e-9)

    monkeypatch.setitem(cli.COMMANDS, "pgm", failing)
    code, body = run("pgm", "--instance", "x", "--f", "{}")
    assert code == 1 and not body["passed"]


def test_report_check_relations():
    rep = cli.Report("x", {})
    assert rep.check("a", 1.0, 1.0 + 1e-10, ">=", 1e-9)
    assert not rep.check("b", 1.0, 1.1, ">=", 1e-9)
    assert rep.check("c", 1.0, 1.0, "<=", 0.0)
    assert rep.check("d", 0.5, 0.5 + 1e-12, "==", 1e-9)
    assert not rep.passed
    assert all({"name", "value", "bound", "relation", "tolerance", "passed"} <= set(c) for c in rep.checks)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_floats_round_trip(x):
    text = cli.dumps({"v": x, "l": [x, 1]})
    assert json.loads(text)["v"] == x


def test_json_writer_formats():
    text = cli.dumps({"a": 1.0, "b": 0.1, "c": [1, 2], "d": None, "e": True})
    assert '"a": 1.0' in text and '"b": 0.10000000000000001' in text
    assert json.loads(text) == {"a": 1.0, "b": 0.1, "c": [1, 2], "d": None, "e": True}


def test_json_and_csv_outputs(tmp_path):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    for seed in ("1", "2"):
        run("end-to-end", "--n", "1", "--l", "1", "--seed", seed, "--json", str(out), "--csv", str(table))
    doc = json.loads(out.read_text())
    assert set(doc) == {"body", "meta"} and "timestamp" in doc["meta"]
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 2 and rows[1]["seed"] == "2" and rows[0]["passed"] == "True"
    assert float(rows[0]["mean_success"]) == pytest.approx(1.0)


def test_dump_state(tmp_path):
    path = tmp_path / "psi.bin"
    run("identities", "--q", "2", "--n", "1", "--m", "2", "--f", '{"kind":"delta"}', "--dump-state", str(path))
    assert path.read_bytes().startswith(b"2,2\n")


def test_bodies_are_byte_identical():
    argv = ["identities", "--q", "3", "--n", "2", "--m", "3", "--f", '{"kind":"random"}', "--seed", "5"]
    a = cli.dumps(cli.run(argv)[1]["body"])
    b = cli.dumps(cli.run(argv)[1]["body"])
    assert a == b
    c = cli.dumps(cli.run(argv[:-1] + ["6"])[1]["body"])
    assert a != c
