import json
import os
import shutil
import subprocess
import sys

import jsonschema
import pytest

from phase_atlas.cli import SCHEMA_PATH, clear_caches, main
from phase_atlas.vfield import FIXTURE_ENV, fixture_dir

SCHEMA = json.loads(SCHEMA_PATH.read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = json.loads(capsys.readouterr().out)
    jsonschema.validate(out, SCHEMA)
    return code, out


def statuses(rep):
    return {c["status"] for c in rep["checks"]}


@pytest.mark.parametrize("target", ["atlas", "singularities", "symmetry", "resolution"])
def test_verify_targets_exit_zero(capsys, target):
    code, rep = run(capsys, "verify", target)
    assert code == 0
    assert rep["command"] == f"verify {target}"
    assert "FAIL" not in statuses(rep)


def test_verify_atlas_data(capsys):
    _, rep = run(capsys, "verify", "atlas")
    charts = {c["chart"]: c["polynomial"] for c in rep["data"]["charts"]}
    assert charts == {f"U{j}": True for j in range(1, 8)}


def test_singularity_rows(capsys):
    _, rep = run(capsys, "verify", "singularities")
    rows = rep["data"]["rows"]
    assert [r["name"] for r in rows] == [f"P{j}" for j in range(1, 8)]
    assert all(r["matched"] for r in rows)


def test_resolution_reports_the_misprint_as_a_warning(capsys):
    _, rep = run(capsys, "verify", "resolution")
    warn = [c for c in rep["checks"] if c["status"] == "WARN"]
    assert any("4.3.2-l" in c["name"] for c in warn)


@pytest.mark.parametrize("target", ["family", "p3-index", "reductions"])
def test_derive(capsys, target):
    code, rep = run(capsys, "derive", target)
    assert code == 0
    assert "FAIL" not in statuses(rep)


def test_transform_is_exact(capsys):
    code, rep = run(capsys, "transform", "--from", "U0", "--to", "U1", "--point", "1,2,3", "--t", "1/2", "--alpha", "1,2,3")
    assert code == 0
    assert rep["data"]["image"] == {"x1": "1/4", "y1": "24", "z1": "1/3"}


def test_transform_off_the_chart_fails(capsys):
    code, rep = run(capsys, "transform", "--from", "U0", "--to", "U1", "--point", "1,2,0")
    assert code == 1
    assert "FAIL" in statuses(rep)


def test_integrate_writes_trajectory_and_poles(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, rep = run(capsys, "integrate", "--ic", "1,1,1", "--alpha", "0.5,0.333333333333333333,0.2", "--t1", "3", "--out", str(out))
    assert code == 0
    assert out.read_text().splitlines()[0] == "t,chart,c1,c2,c3,x,y,z"
    poles = json.loads(out.with_suffix(".poles.json").read_text())
    assert len(poles) >= 1
    assert all("residues" in p for p in poles)


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "nothing"],
        ["integrate", "--ic", "1,1", "--alpha", "0,0,0", "--t1", "1"],
        ["integrate", "--ic", "1,1,1", "--alpha", "0,0,0", "--t1", "0"],
        ["integrate", "--ic", "1,1,1", "--alpha", "0,0,0", "--t1", "1", "--chart", "U9"],
        ["integrate", "--ic", "1,nan,1", "--alpha", "0,0,0", "--t1", "1"],
        ["integrate", "--ic", "1,1,1", "--alpha", "0,0,0", "--t1", "1", "--tol", "-1"],
    ],
)
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as ei:
        main(argv)
    assert ei.value.code == 2


def test_corrupted_fixture_fails(tmp_path, monkeypatch, capsys):
    dst = tmp_path / "fixtures"
    shutil.copytree(fixture_dir(), dst)
    path = dst / "atlas.txt"
    text = path.read_text()
    text = text.replace("  x4 = (x*z - alpha1)*z", "  x4 = (x*z - alpha2)*z")
    path.write_text(text.replace("  x = (x4*z4 + alpha1)*z4", "  x = (x4*z4 + alpha2)*z4"))
    monkeypatch.setenv(FIXTURE_ENV, str(dst))
    try:
        code, rep = run(capsys, "verify", "atlas")
    finally:
        monkeypatch.delenv(FIXTURE_ENV)
        clear_caches()
    assert code == 1
    failed = [c["name"] for c in rep["checks"] if c["status"] == "FAIL"]
    assert any("U4" in n for n in failed)


def test_console_entry_point():
    env = {**os.environ}
    env.pop(FIXTURE_ENV, None)
    proc = subprocess.run(
        [sys.executable, "-m", "phase_atlas.cli", "derive", "p3-index"], capture_output=True, text=True, env=env, check=False
    )
    assert proc.returncode == 0, proc.stderr
    jsonschema.validate(json.loads(proc.stdout), SCHEMA)
