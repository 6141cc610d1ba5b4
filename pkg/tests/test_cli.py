import os
import subprocess
import sys

import numpy as np
import pytest

from jflow.cli.main import main, parse_sweep
from jflow.errors import ConfigError

RULED_5_10 = 'command = "ruled"\n[ruled]\na = 5\nb = 10\n'
RULED_2_2 = 'command = "ruled"\n[ruled]\na = 2\nb = 2\nflow = true\ncells = 32\nhorizon = 4.0\n'
TORUS_CONST = """command = "torus"
[torus]
n = 2
N = 8
B = [[2, 0.5], [0.5, 1]]
[torus.field]
type = "constant"
matrix = [[3, 1], [1, 2]]
"""


def jflow(tmp_path, text, *args, env=None):
    cfg = tmp_path / "run.toml"
    cfg.write_text(text)
    full_env = {k: v for k, v in os.environ.items() if k != "JFLOW_OUT"}
    full_env.update(env or {})
    return subprocess.run(
        [sys.executable, "-m", "jflow", "--config", str(cfg), *args],
        capture_output=True, text=True, cwd=tmp_path, env=full_env, timeout=300,
    )


def results(report: str) -> dict:
    section = report.split("[results]\n")[1].split("\n\n")[0]
    out = {}
    for line in section.splitlines():
        key, _, rest = line.partition(" = ")
        out[key] = rest.split("  #")[0]
    return out


def test_ruled_current_case(tmp_path):
    proc = jflow(tmp_path, RULED_5_10, "--out", "o")
    assert proc.returncode == 2
    report = (tmp_path / "o" / "report.txt").read_text()
    r = results(report)
    assert r["case"] == "current"
    assert r["c"] == "499/333"
    assert r["margin_E0"] == "-167/333"
    assert r["kahler"] == "true"
    assert float(r["lambda"]) == pytest.approx(1.334919225684753, abs=1e-12)
    assert "margin_E0 = -167/333  # exact" in report
    assert "[provenance]" in report and "tool = jflow" in report
    assert proc.stdout == report
    assert (tmp_path / "o" / "profile.csv").read_text().startswith("tau,F\n")


def test_ruled_smooth_with_flow(tmp_path):
    proc = jflow(tmp_path, RULED_2_2, "--out", "o", "--quiet")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout == ""
    r = results((tmp_path / "o" / "report.txt").read_text())
    assert r["case"] == "smooth"
    flow_csv = (tmp_path / "o" / "flow.csv").read_text().splitlines()
    assert flow_csv[0] == "t,defect"
    assert float(flow_csv[-1].split(",")[1]) < 1e-4


def test_sup_ratio_artifact(tmp_path):
    proc = jflow(tmp_path, 'command = "ruled"\n[ruled]\na = "6/5"\nb = 3\nlevels = [3, 4]\n', "--out", "o")
    assert proc.returncode == 2
    lines = (tmp_path / "o" / "sup_ratio.csv").read_text().splitlines()
    assert lines[0] == "level,ratio"
    assert [l.split(",")[0] for l in lines[1:]] == ["3", "4"]
    assert float(lines[2].split(",")[1]) == pytest.approx(0.3305853438, abs=1e-6)


def test_torus_constant(tmp_path):
    proc = jflow(tmp_path, TORUS_CONST, "--out", "o")
    assert proc.returncode == 0, proc.stderr
    r = results(proc.stdout)
    expected = np.trace(np.array([[3, 1], [1, 2]]) @ np.linalg.inv([[2, 0.5], [0.5, 1]]))
    assert float(r["c"]) == pytest.approx(expected, abs=1e-12)
    assert r["degenerate"] == "false"
    u_csv = (tmp_path / "o" / "u.csv").read_text().splitlines()
    assert u_csv[0] == "x1,x2,u"
    assert len(u_csv) == 65


def test_surface_not_exists(tmp_path):
    proc = jflow(tmp_path, 'command = "surface"\n[surface]\na = "3/2"\nb = 4\n', "--out", "o")
    assert proc.returncode == 2
    r = results(proc.stdout)
    assert r["verdict"] == "not-exists"


def test_slope_all_positive(tmp_path):
    text = """command = "slope"
[slope]
preset = "blowup_p3"
omega = [2, -1]
alpha = [2, -1]
[[slope.subvarieties]]
name = "E0"
divisors = [[0, 1]]
"""
    proc = jflow(tmp_path, text, "--out", "o")
    assert proc.returncode == 0, proc.stdout


@pytest.mark.parametrize(
    "text", ['command = "ruled"\n[ruled]\na = 1\nb = 2\n', 'command = "ruled"\n[ruled\n', 'command = "ruled"\n[ruled]\na = 1.5\nb = 2\n']
)
def test_bad_config_exits_1(tmp_path, text):
    proc = jflow(tmp_path, text, "--out", "o")
    assert proc.returncode == 1
    assert proc.stderr.startswith("error:")
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.toml")]) == 1


def test_module_error_exits_1(tmp_path):
    text = TORUS_CONST.replace('type = "constant"\nmatrix = [[3, 1], [1, 2]]\n',
                               'type = "fourier"\nbase = [[1, 0], [0, 1]]\nmodes = [{ entry = [0, 0], kind = "sin", wave = [1, 0], amplitude = 0.3 }]\n')
    text = text.replace("[torus]\n", '[torus]\nmethod = "flow"\nhorizon = 0.001\n')
    proc = jflow(tmp_path, text, "--out", "o")
    assert proc.returncode == 1
    assert "status = error" in (tmp_path / "o" / "report.txt").read_text()
    assert "DivergenceError" in proc.stderr


def test_deterministic_outputs(tmp_path):
    jflow(tmp_path, RULED_2_2, "--out", "one", "--quiet")
    jflow(tmp_path, RULED_2_2, "--out", "two", "--quiet")
    for name in ("profile.csv", "flow.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_output_precedence(tmp_path):
    jflow(tmp_path, RULED_5_10, env={"JFLOW_OUT": str(tmp_path / "env")})
    assert (tmp_path / "env" / "report.txt").exists()
    jflow(tmp_path, 'out = "cfg"\n' + RULED_5_10, env={"JFLOW_OUT": str(tmp_path / "env2")})
    assert (tmp_path / "cfg" / "report.txt").exists() and not (tmp_path / "env2").exists()
    jflow(tmp_path, 'out = "cfg2"\n' + RULED_5_10, "--out", "flag")
    assert (tmp_path / "flag" / "report.txt").exists() and not (tmp_path / "cfg2").exists()
    jflow(tmp_path, RULED_5_10)
    assert (tmp_path / "jflow-out" / "report.txt").exists()


def test_tol_flag(tmp_path):
    proc = jflow(tmp_path, RULED_5_10, "--out", "o", "--tol", "quadrature=1e-8")
    assert "tolerances.quadrature = 1e-08" in proc.stdout
    lam = float(results(proc.stdout)["lambda"])
    assert lam == pytest.approx(1.334919225684753, abs=1e-8)
    assert "# approx(tol=1e-08)" in proc.stdout
    bad = jflow(tmp_path, RULED_5_10, "--tol", "speed=1")
    assert bad.returncode == 1


def test_sweep_csv(tmp_path):
    proc = jflow(tmp_path, 'command = "surface"\n[surface]\na = 2\nb = 2\n', "--out", "o", "--sweep", "a=3/2:3:2;b=2:4:3", "--workers", "2")
    assert proc.returncode == 2
    lines = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "a,b,c,margin_E,margin_H-E,critical_square,verdict,status,error"
    assert len(lines) == 7
    assert lines[1].startswith("3/2,2,")


def test_sweep_torus_amplitude(tmp_path):
    proc = jflow(tmp_path, TORUS_CONST, "--out", "o", "--sweep", "amplitude=0:1/2:2", "--quiet")
    assert proc.returncode == 0, proc.stderr
    rows = (tmp_path / "o" / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("amplitude,c,")
    assert len(rows) == 3


def test_parse_sweep():
    grid = parse_sweep("a=1:2:3;b=5:5:1", "ruled")
    assert [(str(g["a"]), str(g["b"])) for g in grid] == [("1", "5"), ("3/2", "5"), ("2", "5")]
    for bad in ("c=1:2:3", "a=1:2", "a=1:2:0", "a=x:2:2", ""):
        with pytest.raises(ConfigError):
            parse_sweep(bad, "ruled")
    with pytest.raises(ConfigError):
        parse_sweep("a=1:2:2", "slope")
