import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lorenz_lab.cli import main


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def usage_error(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv, out=io.StringIO())
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    return info.value.code, err


def test_analyze_alpha0():
    code, text = run(["analyze", "--alpha", "0"])
    assert code == 0
    rep = json.loads(text)
    assert rep["tau_c"] == pytest.approx(0.122, rel=0.02)
    assert rep["direction"] == "supercritical" and rep["stability"] == "stable"
    assert rep["normal_form"]["beta2"] < 0


def test_analyze_alpha1_to_file(tmp_path):
    dest = tmp_path / "a.json"
    code, text = run(["analyze", "--alpha", "1", "--out", str(dest)])
    assert code == 0 and text == ""
    assert json.loads(dest.read_text())["tau_c"] == pytest.approx(0.021, rel=0.02)


@pytest.mark.parametrize("argv", [
    ["analyze", "--alpha", "2"],
    ["analyze", "--alpha", "abc"],
    ["analyze"],
    ["simulate", "--alpha", "0", "--tau", "-1"],
    ["simulate", "--alpha", "0", "--tau", "0.1", "--initial", "1,2"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, err = usage_error(argv, capsys)
    assert code == 2 and err["error"] == "usage"


def test_map_point_count_checked(capsys):
    assert main(["map", "--alpha", "0", "--tau", "0.1", "--n-points", "10"], out=io.StringIO()) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


def test_simulate_converges_and_writes_sidecar(tmp_path):
    dest = tmp_path / "traj.csv"
    code, text = run(["simulate", "--alpha", "0", "--tau", "0.112", "--h", "0.0025", "--t-end", "100",
                      "--out", str(dest)])
    assert code == 0
    info = json.loads(text)
    assert info["metrics"]["converged"]
    # 0.112 / 0.0025 = 44.8 -> 45 steps per delay
    assert info["h"] == pytest.approx(0.112 / 45)
    assert info["h_requested"] == 0.0025
    side = json.loads((tmp_path / "traj.metrics.json").read_text())
    assert side == info
    data = np.loadtxt(dest, delimiter=",", skiprows=1)
    assert data.shape[1] == 4


def test_simulate_tau_zero_uses_ode(tmp_path):
    code, text = run(["simulate", "--alpha", "0", "--tau", "0", "--out", str(tmp_path / "t.csv")])
    info = json.loads(text)
    assert code == 0 and info["metrics"]["converged"] and info["h"] == 1e-3


def test_simulate_stdout_csv(capsys):
    code, text = run(["simulate", "--alpha", "0", "--tau", "0.112", "--t-end", "1"])
    assert code == 0 and text.startswith("t,x,y,z\n")
    assert "metrics" in json.loads(capsys.readouterr().err)


def test_simulate_oscillation_period():
    code, text = run(["simulate", "--alpha", "0", "--tau", "0.125", "--out", "/dev/null", "--metrics", "/dev/null"])
    m = json.loads(text)["metrics"]
    assert m["oscillating"]
    # 7.7% below the linear value 2 pi / nu0 at this distance from onset
    assert m["period"] == pytest.approx(2 * math.pi / 16.677319353136554, rel=0.10)


def test_simulate_divergence_exit_1(tmp_path, capsys):
    code, _ = run(["simulate", "--alpha", "1", "--tau", "0.03", "--out", str(tmp_path / "d.csv")])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "divergence" and err["blowup_time"] > 0


def test_sweep_outputs(tmp_path):
    csv_path, json_path = tmp_path / "s.csv", tmp_path / "s.json"
    code, text = run(["sweep", "--n", "21", "--csv", str(csv_path), "--json", str(json_path)])
    assert code == 0
    taus = np.loadtxt(csv_path, delimiter=",", skiprows=1, usecols=1)
    assert np.all(np.diff(taus) < 0)
    assert json.loads(text)["verdicts"]["tau_c_strictly_decreasing"]
    assert json.loads(json_path.read_text()) == json.loads(text)


def test_sweep_bad_n(capsys):
    assert run(["sweep", "--n", "1"])[0] == 1
    assert json.loads(capsys.readouterr().err)["error"] == "configuration_error"


def test_map_outputs(tmp_path):
    code, text = run(["map", "--alpha", "0", "--tau", "0.1207849983815168",
                      "--csv", str(tmp_path / "m.csv"), "--svg", str(tmp_path / "m.svg")])
    assert code == 0
    s = json.loads(text)
    assert s["min_distance"] < 1e-6 and s["origin_crossed"]
    assert (tmp_path / "m.svg").read_text().startswith("<svg")
    assert (tmp_path / "m.csv").read_text().startswith("nu,re_omega,im_omega\n")


def test_map_published_tau_values():
    # 0.122 lies 1% above the computed onset: the curve has just passed the origin
    s = json.loads(run(["map", "--alpha", "0", "--tau", "0.122"])[1])
    assert s["origin_crossed"] and s["unstable_roots"] == 2
    s = json.loads(run(["map", "--alpha", "0", "--tau", "0.06"])[1])
    assert not s["origin_crossed"] and s["min_distance"] > 100


def test_outputs_bit_identical(tmp_path):
    a = run(["analyze", "--alpha", "0.3"])[1]
    b = run(["analyze", "--alpha", "0.3"])[1]
    assert a == b


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lorenz_lab", "analyze", "--alpha", "5"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"] == "usage"
