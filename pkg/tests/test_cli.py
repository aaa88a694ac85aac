import json
import re

import pytest

from athena_kin.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _values(text):
    return {k: float(v) for k, v in re.findall(r"^(\w+) = (-?[\d.]+)", text, re.M)}


def test_ik_axis_pose(capsys):
    code, out, _ = run(capsys, "ik", "0", "150", "12.5", "100", "--verify", "--no-limits")
    assert code == 0
    assert _values(out)["q4"] == pytest.approx(12.5)
    assert out.rstrip().endswith("ok")


def test_ik_unreachable(capsys):
    code, _, err = run(capsys, "ik", "0", "90", "0", "10", "--no-limits")
    assert code == 2 and "NO_REAL_SOLUTION" in err


def test_ik_fk_round_trip(capsys):
    for arch in ("athena1", "athena2"):
        code, out, _ = run(capsys, "--arch", arch, "--json", "ik", "-8.75", "115.6", "20.0", "100.0")
        assert code == 0
        j = json.loads(out)["joints"]
        q3 = j.get("q3_mm", j.get("q3_deg"))
        code, out, _ = run(capsys, "--arch", arch, "--json", "fk", *map(repr, (j["q1_mm"], j["q2_mm"], q3, j["q4_deg"])),
                           "--seed", "-5", "110", "90", "--verify")
        assert code == 0
        doc = json.loads(out)
        p = doc["pose"]
        assert (p["psi_deg"], p["theta_deg"], p["phi_deg"], p["l_ins_mm"]) == pytest.approx((-8.75, 115.6, 20, 100), abs=1e-6)
        assert doc["residuals"]["ok"]


def test_malformed_number_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fk", "1", "x2", "3", "4"])
    assert exc.value.code == 1
    assert "q2" in capsys.readouterr().err


def test_config_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": {"l1": 1}}')
    code, _, err = run(capsys, "--config", str(bad), "ik", "0", "150", "0", "100")
    assert code == 1 and "field" in err


def test_config_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ATHENA_KIN_CONFIG", str(tmp_path / "missing.json"))
    code, _, _ = run(capsys, "ik", "0", "150", "0", "100")
    assert code == 1


def test_count_only_total(capsys):
    code, out, _ = run(capsys, "workspace", "--count-only")
    assert code == 0 and "total=13314576" in out


def test_workspace_ply_and_manifest(tmp_path, capsys):
    base = tmp_path / "ws"
    manifest = tmp_path / "run.json"
    code, out, _ = run(capsys, "--manifest", str(manifest), "--arch", "athena2", "workspace", "--step", "20",
                       "--format", "ply", "--format", "json", "--valid-only", "--output", str(base))
    assert code == 0
    valid = int(re.search(r"valid=(\d+)", out).group(1))
    assert valid == 756
    assert f"element vertex {valid}" in (tmp_path / "ws.ply").read_text()
    m = json.loads(manifest.read_text())
    assert m["subcommand"] == "workspace" and m["exit_code"] == 0 and len(m["config_sha256"]) == 64


def test_quick_sweep_workers_match(capsys):
    _, serial, _ = run(capsys, "workspace", "--step", "50")
    _, parallel, _ = run(capsys, "--workers", "2", "workspace", "--step", "50")
    assert serial == parallel


def test_compare_modes(tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--counts", "196817", "241586")
    assert code == 0 and "+22.75%" in out
    code, out, _ = run(capsys, "compare", "--counts", "5", "5")
    assert "+0.00%" in out
    code, out, _ = run(capsys, "--json", "compare", "--both", "--step", "20")
    doc = json.loads(out)
    assert doc["count_b"] > doc["count_a"]
    run(capsys, "workspace", "--step", "20", "--format", "json", "--output", str(tmp_path / "a"))
    run(capsys, "workspace", "--step", "10", "--format", "json", "--output", str(tmp_path / "b"))
    code, _, _ = run(capsys, "compare", str(tmp_path / "a.json"), str(tmp_path / "b.json"))
    assert code == 5
    code, _, _ = run(capsys, "compare")
    assert code == 1


def test_singularity(tmp_path, capsys):
    code, out, _ = run(capsys, "--json", "singularity", "--step", "20")
    doc = json.loads(out)
    assert code == 0 and doc["flagged_count"] == 0 and doc["evaluated_count"] == 621
    run(capsys, "workspace", "--step", "20", "--format", "csv", "--output", str(tmp_path / "s"))
    code, out, _ = run(capsys, "--json", "singularity", "--input", str(tmp_path / "s.csv"), "--stride", "10")
    doc = json.loads(out)
    assert code == 0 and doc["evaluated_count"] == 63


def test_stiffness(capsys):
    code, out, _ = run(capsys, "stiffness", "--from-deflection", "30", "0.23")
    assert code == 0 and "130.43" in out
    code, out, _ = run(capsys, "stiffness", "--from-deflection", "30", "3.96")
    assert "7.58" in out
    code, _, _ = run(capsys, "stiffness", "--from-deflection", "30", "0")
    assert code == 1
    code, out, _ = run(capsys, "stiffness")
    assert code == 0 and "no model estimates" in out
    code, out, _ = run(capsys, "stiffness", "--pose", "-8.75", "115.6", "0", "100")
    assert code == 0 and out.count("LUMPED_MODEL") == 2
