import csv
import json
import shutil
import subprocess
import sys

import pytest

from lcx import certio
from lcx.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def line_cert(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "line.json"
    assert run("witness-line", "--spec-rule", "abs:1", "--out", path) == 0
    return path


def test_witness_line_and_verify(line_cert, tmp_path):
    doc = json.loads(line_cert.read_text())
    assert doc["kind"] == "witness-line" and doc["schema"] == certio.SCHEMA
    report = tmp_path / "report.json"
    assert run("verify", line_cert, "--out", report) == 0
    assert json.loads(report.read_text())["ok"] is True


def test_output_is_byte_identical(line_cert, tmp_path):
    again = tmp_path / "again.json"
    assert run("witness-line", "--spec-rule", "abs:1", "--out", again) == 0
    assert again.read_bytes() == line_cert.read_bytes()


def test_line_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert run("witness-line", "--spec-rule", "constant:1:1", "--csv", out) == 0
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "f", "f^(1)", "f^(2)"]
    assert len(rows) == 202


@pytest.mark.parametrize("args", [
    ["witness-line", "--spec-rule", "constant:0:-1"],
    ["witness-line", "--spec-rule", "nonsense"],
    ["witness-line", "--spec-override", "0:1"],
    ["witness-line", "--tol", "0"],
    ["witness-line", "--spec-rule", "constant:1:1", "--target-rule", "constant:0:1"],
    ["witness-bundle", "--dim", "2", "--patches", "0,0@1;1,0@1"],
    ["deriv-check", "--r-max", "-1"],
    ["no-such-command"],
])
def test_invalid_input_exits_1(args):
    assert run(*args) == 1


def test_undecided_exits_2(tmp_path):
    out = tmp_path / "u.json"
    assert run("witness-line", "--tol", "1e-30", "--out", out) == 2
    doc = json.loads(out.read_text())
    assert doc["kind"] == "undecided-report" and doc["command"] == "witness-line"


def test_verify_rejects_bad_files(line_cert, tmp_path):
    truncated = tmp_path / "t.json"
    truncated.write_text(line_cert.read_text()[:200])
    assert run("verify", truncated) == 1
    doc = json.loads(line_cert.read_text())
    doc["m"] = str(int(doc["m"]) - 1)
    tampered = tmp_path / "m.json"
    certio.write(doc, tampered)
    assert run("verify", tampered) == 1
    other = tmp_path / "o.json"
    other.write_text(json.dumps({"schema": certio.SCHEMA, "kind": "mystery"}))
    assert run("verify", other) == 1
    assert run("verify", tmp_path / "missing.json") == 1


def test_witness_bundle(tmp_path):
    out = tmp_path / "b.json"
    assert run("witness-bundle", "--dim", "2", "--fibre-dim", "3", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "witness-bundle" and doc["p"] == "3"
    assert run("verify", out) == 0


def test_deriv_check(tmp_path):
    out, table = tmp_path / "d.json", tmp_path / "d.csv"
    assert run("deriv-check", "--trials", 2, "--with-f-line", "--out", out, "--csv", table) == 0
    doc = json.loads(out.read_text())
    assert doc["pass"] is True and len(doc["cases"]) == 4
    with open(table, newline="") as fh:
        assert next(csv.reader(fh)) == ["operator", "case", "t", "error"]
    assert run("deriv-check", "--trials", 2, "--slope-threshold", 2.0) == 1
    assert run("deriv-check", "--trials", 1, "--r-max", 0) == 0


def test_bilinear_and_algebra(tmp_path):
    out = tmp_path / "bl.json"
    assert run("bilinear", "--witnesses", 2, "--trials", 3, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert all(w["verified"] for w in doc["witnesses"])
    mult_cert = tmp_path / "mult.json"
    certio.write({k: v for k, v in doc["witnesses"][0].items() if k != "verified"}, mult_cert)
    assert run("verify", mult_cert) == 0
    assert run("algebra", "--trials", 20) == 0


def test_acceptance_subset(capsys):
    assert run("acceptance", "--only", "5") == 0
    assert "[PASS] criterion 5" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("lcx") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["lcx", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "witness-line" in proc.stdout


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lcx.cli", "verify", "/nonexistent.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
