import json
import math
import os
import subprocess
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"


def _exe():
    exe = os.environ.get("BWH_EXE")
    if not exe:
        pytest.skip("BWH_EXE not set")
    return exe


def test_cli_bands_free(tmp_path):
    proc = subprocess.run(
        [_exe(), "bands", "--config", str(CONFIGS / "bands_free.json"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["status"] == "ok"
    lines = (tmp_path / "bands.csv").read_text().splitlines()
    assert lines[0].split(",") == ["theta_1", "band", "lambda", "config_hash", "seed"]
    for line in lines[1:]:
        theta, band, lam, chash, seed = line.split(",")
        assert chash == summary["config_hash"]
        if band == "0":
            assert abs(float(lam) - 4 * math.pi**2 * float(theta) ** 2) <= 1e-10


def test_cli_error_json(tmp_path):
    proc = subprocess.run(
        [_exe(), "effective", "--config", str(tmp_path / "missing.json")], capture_output=True, text=True
    )
    assert proc.returncode == 2
    err = json.loads(proc.stderr)
    assert err["kind"] == "config_error"


def test_module_free_medium():
    bwh = pytest.importorskip("bwh")
    m = bwh.free_medium(2)
    lam = bwh.bands(m, [0.1, 0.2], cutoff=3, count=1)[0]
    assert abs(lam - 4 * math.pi**2 * 0.05) < 1e-10
    eff = bwh.effective(m, cutoff=3)
    assert abs(eff["A_star"] - [[1, 0], [0, 1]]).max() < 1e-8


def test_module_mathieu_and_series():
    bwh = pytest.importorskip("bwh")
    m = bwh.medium_from_json((CONFIGS / "media" / "asymmetric1d.json").read_text())
    crit = bwh.critical(m, cutoff=16)
    assert crit["grad_norm"] < 1e-8
    deformation = (CONFIGS / "deform" / "cyclic_sine.json").read_text()
    table = bwh.supercell_oracle(m, deformation, [0.04, 0.02, 0.01])
    assert 1.8 <= table["slope_lambda"] <= 2.2
    assert 1.8 <= table["slope_A"] <= 2.2


def test_module_branches_and_errors():
    bwh = pytest.importorskip("bwh")
    import numpy as np

    a0 = np.diag([0.0, 1.0]).astype(complex)
    a1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    res = bwh.track_branches([([0], a0), ([1], a1)], 0.0, 1, [np.array([0.1])])
    assert abs(res["lambda"][0][0] - (1 - math.sqrt(1.04)) / 2) < 1e-12
    with pytest.raises(ValueError):
        bwh.track_branches([([0], a0)], 0.5, 1, [np.array([0.0])])
    code, out, err = bwh.run_cli(["nonsense"])
    assert code == 2
