import json
import math
import os
import subprocess
import sys

import pytest
import yaml

from radcomp.cli import EXIT_INPUT, EXIT_OK, Scenario, main
from radcomp.errors import InputError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SC = os.path.join(ROOT, "scenarios")


def write(tmp_path, d, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(d) if isinstance(d, dict) else d)
    return str(path)


def report(out):
    with open(os.path.join(out, "report.json")) as fh:
        return json.load(fh)


@pytest.mark.parametrize("name", ["profile_sphere", "geodesic_sphere", "refcurve_sphere4", "ellipse_sphere",
                                  "example_cylinder"])
def test_shipped_scenarios_pass(tmp_path, name):
    out = str(tmp_path / name)
    assert main([os.path.join(SC, name + ".yaml"), "--out", out, "--svg"]) == EXIT_OK
    rep = report(out)
    assert rep["status"] == "PASS" and len(rep["scenario_hash"]) == 64


def test_config_echo_and_determinism(tmp_path):
    sc = {"run": "verify-triangles", "reference": {"kind": "constant", "curvature": 1.0},
          "manifold": {"kind": "revolution", "profile": {"kind": "constant", "curvature": 4.0}},
          "p": [0.6, 0.0], "n_triangles": 4, "n_samples": 17, "angle_monotone_nodes": 0}
    path = write(tmp_path, sc)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main([path, "--out", a, "--workers", "1", "--seed", "5"]) == EXIT_OK
    assert main([path, "--out", b, "--workers", "1", "--seed", "5"]) == EXIT_OK
    ra, rb = report(a), report(b)
    assert ra["config"]["seed"] == 5 and ra["config"]["n_triangles"] == 4
    assert ra["config"]["manifold"] == sc["manifold"]
    assert ra["scenario_hash"] == rb["scenario_hash"]
    assert ra["results"] == rb["results"]
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


@pytest.mark.parametrize("sc", [
    {"run": "profile", "reference": {"kind": "curvature", "table": [[0, 1], [0.5, 1], [0.4, 1]]}},
    {"run": "profile", "reference": {"kind": "curvature", "table": [[0, 1], [1, "x"]]}},
    {"run": "profile", "reference": {"kind": "curvature", "expression": "__import__('os')"}},
    {"run": "profile", "bogus": 1},
    {"run": "nonsense"},
    {"run": "verify-triangles", "tolerances": {"tau_xyz": 1.0}},
    {"run": "verify-triangles", "manifold": {"kind": "torus"}},
    {"name": "no run"},
])
def test_config_errors_exit_2(tmp_path, sc):
    assert main([write(tmp_path, sc), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert not (tmp_path / "o" / "report.json").exists()


def test_malformed_yaml_exit_2(tmp_path):
    assert main([write(tmp_path, "run: [profile\n"), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert main([str(tmp_path / "missing.yaml")]) == EXIT_INPUT


def test_bad_tolerance_override(tmp_path):
    path = os.path.join(SC, "profile_sphere.yaml")
    assert main([path, "--out", str(tmp_path), "--tolerance", "tau_cmp"]) == EXIT_INPUT


def test_scenario_from_dict():
    sc = Scenario.from_dict({"run": "audit"})
    assert sc.p == [1.0, 0.0] and sc.choice == "L"
    with pytest.raises(InputError):
        Scenario.from_dict([1, 2])


def test_entry_point_subprocess(tmp_path):
    out = str(tmp_path / "p")
    r = subprocess.run([sys.executable, "-m", "radcomp.cli", os.path.join(SC, "profile_sphere.yaml"),
                        "--out", out], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "profile: PASS" in r.stdout
    assert math.isclose(report(out)["results"]["ell"], math.pi, abs_tol=1e-6)
