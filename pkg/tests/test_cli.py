import csv
import io
import json
import math
import subprocess
import sys

import pytest

from reflectlab.cli import main, parse_angle
from reflectlab.polar import critical_angle, sonic_angle


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# reflectlab=")
    return lines[0], list(csv.reader(io.StringIO("\n".join(lines[1:]))))


def test_parse_angle():
    assert parse_angle("90") == pytest.approx(math.pi / 2)
    assert parse_angle("pi") == math.pi
    assert parse_angle("3*pi/4") == pytest.approx(0.75 * math.pi)
    assert parse_angle("-pi/2") == pytest.approx(-0.5 * math.pi)
    with pytest.raises(ValueError):
        parse_angle("__import__('os')+pi")


def test_polar_csv(capsys):
    code, out, err = run_cli(capsys, "polar", "--Mu", "2", "--gamma", "1.4", "--samples", "40")
    assert code == 0
    header, rows = parse_csv(out)
    assert "gamma=1.4" in header
    assert rows[0] == ["beta_rad", "tau_rad", "vdx", "vdy", "rhoD", "MD", "type"]
    assert len(rows) == 41
    summary = dict(kv.split("=") for kv in err.strip().split(","))
    assert float(summary["tau_star"]) == pytest.approx(critical_angle(2.0)[0], rel=1e-11)
    assert float(summary["tau_s"]) == pytest.approx(sonic_angle(2.0)[0], rel=1e-11)


def test_polar_json_with_certificate(capsys, tmp_path):
    path = tmp_path / "polar.json"
    code, out, _ = run_cli(capsys, "polar", "--Mu", "2", "--samples", "30", "--certify", "--format", "json", "--out", str(path))
    assert code == 0
    assert out.startswith("tau_star=")
    data = json.loads(path.read_text())
    assert data["header"]["gamma"] == 1.4
    assert data["convexity_min"] > 0
    assert len(data["rows"]) == 30


def test_outputs_are_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["polar", "--Mu", "3", "--samples", "25", "--out", str(p)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("theta", [100.0, 130.0, 150.0])
def test_pencil_wall_wall(capsys, theta):
    code, _, err = run_cli(capsys, "pencil", "--phi1", str(theta), "--phi2", "pi", "--neumann")
    assert code == 0
    summary = dict(kv.split("=") for kv in err.strip().split(","))
    assert float(summary["beta1"]) == pytest.approx(1.0 / (1.0 - theta / 180.0), rel=1e-12)


def test_pencil_right_angle_json(capsys):
    code, out, _ = run_cli(capsys, "pencil", "--phi1", "90", "--phi2", "180", "--neumann", "--format", "json", "--count", "2")
    assert code == 0
    data = json.loads(out)
    assert {"beta": 0.0, "mult": 2} in data["betas"]
    assert [b["beta"] for b in data["betas"]] == pytest.approx([-4, -2, 0, 2, 4])


def test_pencil_base_corners(capsys):
    _, _, err = run_cli(capsys, "pencil", "--corner", "A-S")
    assert float(dict(kv.split("=") for kv in err.strip().split(","))["beta1"]) == pytest.approx(2.0, abs=1e-12)
    code, _, err = run_cli(capsys, "pencil", "--corner", "xi_B")
    assert code == 0
    beta0 = float(dict(kv.split("=") for kv in err.strip().split(","))["beta0"])
    assert beta0 > 1


def test_pencil_missing_angles(capsys):
    code, _, err = run_cli(capsys, "pencil", "--phi1", "30")
    assert code == 1
    assert "domain error" in err


def test_trivial(capsys):
    code, out, err = run_cli(capsys, "trivial", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["reflected_type"] == "weak"
    assert data["rh_residual_max"] < 1e-10
    assert data["max_pseudo_mach"] < 1
    assert err.startswith("M1=2.8856")


def test_linsolve(capsys, tmp_path):
    mesh = tmp_path / "mesh.txt"
    code, out, err = run_cli(capsys, "linsolve", "--mesh-h", "0.1", "--format", "json", "--mesh-out", str(mesh))
    assert code == 0
    data = json.loads(out)
    assert data["gap"] > 1e2
    assert data["normalization_xi_b"] == 1.0
    assert data["max_principle_ok"]
    assert mesh.read_text().startswith("# reflectlab=")
    header, rows = parse_csv(run_cli(capsys, "linsolve", "--mesh-h", "0.1")[1])
    assert rows[0] == ["x", "y", "psi_prime"]


def test_perturb_zero(capsys):
    code, out, err = run_cli(capsys, "perturb", "--dtheta", "0", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["iterations"] == 1
    assert data["displacement"] == pytest.approx(0.0, abs=1e-12)
    assert "iterations=1," in err


def test_perturb_theta(capsys):
    code, out, _ = run_cli(capsys, "perturb", "--dtheta", "0.1", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["type_flags"]["weak"] and data["type_flags"]["transonic"]
    assert data["residual_history"][-1] < 1e-8


def test_transition_small_grid(capsys):
    code, out, err = run_cli(capsys, "transition", "--M1-min", "2", "--M1-max", "3", "--points", "2", "--scan", "20")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0] == ["M1", "theta_d_deg", "theta_s_deg", "status"]
    for r in rows[1:]:
        assert 90 < float(r[1]) < float(r[2]) < 180
        assert r[3] == "ok"
    assert "theta_s>theta_d=2/2" in err


def test_exit_codes(capsys):
    assert run_cli(capsys, "polar", "--bogus")[0] == 64
    assert run_cli(capsys)[0] == 64
    assert run_cli(capsys, "polar", "--Mu", "0.5")[0] == 1
    assert run_cli(capsys, "trivial", "--gamma", "0.9")[0] == 1
    # a perturbation far outside the trust region fails to converge
    code, _, err = run_cli(capsys, "perturb", "--dtheta", "0.25", "--max-iter", "1")
    assert code == 2
    assert "solver failure" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "reflectlab", "pencil", "--phi1", "120", "--phi2", "pi", "--neumann"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "beta1=3" in proc.stderr
