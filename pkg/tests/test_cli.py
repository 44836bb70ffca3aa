import json
import os

import pytest

from bianchi_lab.cli import main
from bianchi_lab.conventions import load_conventions


def run(argv):
    return main(argv)


def test_verify_algebra_report_schema(tmp_path):
    out = tmp_path / "r.json"
    code = run(["verify", "--suite", "algebra", "--dim", "4", "--seed", "1",
                "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["summary"]["failed"] == 0
    assert report["meta"]["seed"] == 1
    assert report["meta"]["conventions_hash"] == load_conventions()["hash"]
    anchors = [c["anchor"] for c in report["cases"]]
    assert all(anchors)  # every case carries exactly one anchor tag
    for c in report["cases"]:
        assert set(c) == {"name", "value", "tolerance", "pass", "anchor"}


def test_csv_export(tmp_path):
    out = tmp_path / "r.csv"
    code = run(["verify", "--suite", "algebra", "--seed", "2",
                "--format", "csv", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "name,value,tolerance,pass,anchor"
    assert len(lines) > 5


def test_manifest_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"suite": "algebra", "bogus": 1}))
    out = tmp_path / "r.json"
    code = run(["verify", "--manifest", str(bad), "--out", str(out)])
    assert code == 2
    assert not out.exists()


def test_corrupted_manifest(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "r.json"
    assert run(["verify", "--manifest", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_manifest_supplies_defaults(tmp_path):
    man = tmp_path / "m.json"
    man.write_text(json.dumps({"suite": "algebra", "seed": 7,
                               "samples": 5}))
    out = tmp_path / "r.json"
    assert run(["verify", "--manifest", str(man), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["meta"]["seed"] == 7


def test_solve_rejects_non_flat_preset():
    assert run(["solve", "--preset", "conformal_bump"]) == 2


def test_unknown_flag_is_usage_error():
    assert run(["verify", "--nonsense"]) == 2


def test_serial_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["verify", "--suite", "algebra", "--seed", "5", "--serial",
                "--out", str(a)]) == 0
    assert run(["verify", "--suite", "algebra", "--seed", "5", "--serial",
                "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_audit_matches_committed_artifact(capsys):
    assert run(["audit"]) == 0
    assert "match" in capsys.readouterr().out


def test_audit_write_roundtrip(tmp_path):
    out = tmp_path / "conv.json"
    assert run(["audit", "--write", str(out)]) == 0
    fresh = json.loads(out.read_text())
    committed = load_conventions()
    assert fresh["constraints"] == committed["constraints"]
    assert fresh["ricci_action"] == committed["ricci_action"]
    assert fresh["hash"] == committed["hash"]
