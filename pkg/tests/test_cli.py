import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from hartree_balance.checkpoint import read_checkpoint, sidecar_path, write_checkpoint
from hartree_balance.cli import main, verify

SMALL_GRID = "[grid]\nkind = tensor\nL = 8\nn = 32\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, command, body, out="out", extra=()):
    cfg = write(tmp_path, f"{command}-{out}.ini", body)
    out_dir = tmp_path / out
    code = main([command, "--config", cfg, "--out", str(out_dir), *extra])
    return code, out_dir


def manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


@pytest.fixture(scope="module")
def supercritical(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("gs")
    body = "[problem]\nN = 3\ngamma1 = 2.5\ngamma2 = 1\nc = 1\n" + SMALL_GRID
    code, out = run(tmp, "ground-state", body)
    assert code == 0
    return out


def test_ground_state_artifacts_and_manifest(supercritical):
    m = manifest(supercritical)
    assert m["status"] == "ok" and m["exit_code"] == 0
    assert m["command"] == "ground-state"
    assert len(m["config_hash"]) == 64
    assert {"numpy", "scipy", "python", "hartree_balance"} <= set(m["versions"])
    written = {p.name for p in supercritical.iterdir()}
    assert set(m["artifacts"]) == written
    assert {"ground_state.hbal", "ground_state.json"} <= written


def test_verify_fresh_state_passes(supercritical, capsys):
    path = supercritical / "ground_state.hbal"
    assert main(["verify", "--checkpoint", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.strip().splitlines()[-1] == "PASS"
    for key in ("mass", "E ", "Q ", "lambda", "residual"):
        assert key in out


def test_verify_detects_corruption(supercritical, tmp_path, capsys):
    src = supercritical / "ground_state.hbal"
    ck = read_checkpoint(src)
    bad = tmp_path / "bad.hbal"
    write_checkpoint(bad, ck.field * 1.01, ck.gamma1, ck.gamma2)
    shutil.copy(sidecar_path(src), sidecar_path(bad))
    report = verify(bad)
    assert not report.checks["mass"]
    assert not report.checks["residual"]
    assert main(["verify", "--checkpoint", str(bad)]) == 3
    assert capsys.readouterr().out.strip().splitlines()[-1] == "FAIL"


def test_verify_corrupt_file_is_format_error(tmp_path):
    bad = tmp_path / "x.hbal"
    bad.write_bytes(b"NOTACHECKPOINT" * 10)
    assert main(["verify", "--checkpoint", str(bad)]) == 2


def test_evolve_from_checkpoint(supercritical, tmp_path):
    body = (
        f"[io]\ncheckpoint = {supercritical / 'ground_state.hbal'}\n"
        "[dynamics]\nT = 0.02\ndt = 0.001\nmonitor_every = 5\n"
    )
    code, out = run(tmp_path, "evolve", body)
    assert code == 0
    written = {p.name for p in out.iterdir()}
    assert {"trajectory.csv", "final.hbal", "evolve_summary.json", "manifest.json"} <= written
    assert set(manifest(out)["artifacts"]) == written
    lines = [l for l in (out / "trajectory.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0].startswith("t,mass,energy")
    assert len(lines) == 1 + 5


def test_critical_below_threshold_exits_2(tmp_path, capsys):
    body = "[problem]\nN = 3\ngamma1 = 2\ngamma2 = 1\nc = 1\n" + SMALL_GRID
    code, out = run(tmp_path, "ground-state", body)
    assert code == 2
    assert "there exists no solutions to" in capsys.readouterr().err
    m = manifest(out)
    assert m["exit_code"] == 2 and "there exists no solutions to" in m["message"]


def test_scan_with_failing_row(tmp_path):
    # the row below the critical mass is refused; the other is attained
    body = "[problem]\nN = 3\ngamma1 = 2\ngamma2 = 1\nc_list = 1.0, 4.3\n" + SMALL_GRID
    code, out = run(tmp_path, "scan-gamma", body)
    assert code == 0
    rows = [l.split(",") for l in (out / "scan.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0][:6] == ["c", "value", "verdict", "lambda", "kinetic", "restarts"]
    assert rows[1][2] == "failed"
    assert rows[2][2] == "attained"
    summary = json.loads((out / "scan_summary.json").read_text())
    assert summary["failed_rows"] == [1.0]


def test_scan_csv_reproducible(tmp_path):
    body = "[problem]\nN = 3\ngamma1 = 1.5\ngamma2 = 0.5\nc_list = 2, 12\n" + SMALL_GRID
    texts = []
    for out in ("a", "b"):
        code, d = run(tmp_path, "scan-m", body, out=out, extra=("--seed", "7"))
        assert code == 0
        raw = (d / "scan.csv").read_text()
        assert raw.startswith("#")
        texts.append([l for l in raw.splitlines() if not l.startswith("#")])
    assert texts[0] == texts[1]
    assert "vanishing" in texts[0][1] and "attained" in texts[0][2]


def test_choquard_command(tmp_path, capsys):
    code, out = run(tmp_path, "choquard", "[problem]\nN = 3\ngamma = 2\n" + SMALL_GRID)
    assert code == 0
    assert main(["verify", "--checkpoint", str(out / "choquard.hbal")]) == 0


def test_zero_mass_verify(tmp_path):
    body = (
        "[problem]\nN = 5\ngamma1 = 3\ngamma2 = 2\nzero_mass = true\n"
        "[grid]\nkind = radial\nM = 512\nR_max = 40\n"
    )
    code, out = run(tmp_path, "ground-state", body)
    assert code == 0
    rep = verify(out / "ground_state.hbal")
    assert rep.passed
    assert rep.lam == 0.0


def test_config_errors_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "ground-state", "[problem]\nN = 3\ngamma1 = 1\ngamma2 = 1\nbogus = 2\n")
    assert code == 2
    err = capsys.readouterr().err
    assert "strict ordering" in err and "bogus" in err
    assert main(["choquard"]) == 2


def test_blowup_summary(tmp_path):
    body = (
        "[problem]\nN = 3\ngamma1 = 2.7\ngamma2 = 2.2\n" + SMALL_GRID
        + "[dynamics]\nT = 0.02\ndt = 0.001\nsigma = 1\namplitude = 0.5\n"
    )
    code, out = run(tmp_path, "blowup", body)
    assert code == 0
    rec = json.loads((out / "blowup.json").read_text())
    assert rec["verdict"] in ("stable", "suspected", "blow-up")
    assert rec["initial_energy"] > 0
