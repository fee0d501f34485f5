import json

import numpy as np
import pytest

from stifflab import fileio
from stifflab.cli import main


def run_cli(argv):
    return main(argv)


def read_err(capsys):
    captured = capsys.readouterr()
    return json.loads(captured.err.strip().splitlines()[-1])


def test_scenarios_listing(capsys):
    assert run_cli(["scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("sphere_harmonic", "ellipsoid_quartic", "flat_axis_m",
                 "exp_degenerate", "plane_harmonic"):
        assert name in out


def test_run_stiff_writes_parseable_csv(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps", "0.1",
                      "--t1", "1", "--out-dir", str(tmp_path),
                      "--no-timestamp"])
    assert status == 0
    path = tmp_path / "plane_harmonic_stiff_eps0.1.csv"
    assert path.exists()
    traj = fileio.read_trajectory(path)
    assert traj.epsilon == 0.1
    assert traj.times[0] == 0.0 and traj.times[-1] == 1.0
    assert "wrote" in capsys.readouterr().out


def test_run_effective_mode(tmp_path):
    status = run_cli(["run", "--mode", "effective", "--scenario",
                      "sphere_harmonic", "--t1", "1", "--out-dir",
                      str(tmp_path), "--no-timestamp"])
    assert status == 0
    path = tmp_path / "sphere_harmonic_effective.csv"
    assert "# mode: effective" in path.read_text()
    traj = fileio.read_trajectory(path)
    assert traj.epsilon is None
    assert np.max(np.abs(traj.r)) <= 1e-10


def test_repeat_runs_are_byte_identical(tmp_path):
    argv = ["run", "--scenario", "plane_harmonic", "--eps", "0.1",
            "--t1", "0.5", "--no-timestamp", "--out-dir"]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run_cli(argv + [str(a)]) == 0
    assert run_cli(argv + [str(b)]) == 0
    fa = (a / "plane_harmonic_stiff_eps0.1.csv").read_bytes()
    fb = (b / "plane_harmonic_stiff_eps0.1.csv").read_bytes()
    assert fa == fb


def test_custom_launch_flags(tmp_path):
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps", "0.1",
                      "--t1", "0.5", "--launch-v", "0.3,2.0",
                      "--out-dir", str(tmp_path), "--no-timestamp"])
    assert status == 0
    traj = fileio.read_trajectory(
        tmp_path / "plane_harmonic_stiff_eps0.1.csv")
    assert traj.vs[0, 0] == 0.3 and traj.vs[0, 1] == 2.0


def test_stiff_requires_eps(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "plane_harmonic",
                      "--out-dir", str(tmp_path)])
    assert status == 1
    err = read_err(capsys)
    assert err["error"] == "ValidationError"
    assert "eps" in err["message"]
    assert err["exit_status"] == 1


def test_unknown_scenario(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "torus", "--eps", "0.1",
                      "--out-dir", str(tmp_path)])
    assert status == 1
    assert read_err(capsys)["error"] == "UnknownScenarioError"


def test_negative_eps(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps",
                      "-0.1", "--out-dir", str(tmp_path)])
    assert status == 1
    assert read_err(capsys)["error"] == "ValidationError"


def test_numerical_failure_exit_status(tmp_path, capsys):
    # the origin cannot be projected onto the sphere: NumericalError -> 2
    status = run_cli(["run", "--mode", "effective", "--scenario",
                      "sphere_harmonic", "--launch-p", "0,0,0",
                      "--t1", "1", "--out-dir", str(tmp_path)])
    assert status == 2
    err = read_err(capsys)
    assert err["error"] == "ProjectionError"
    assert err["exit_status"] == 2


def test_sweep_writes_report_and_runs(tmp_path, capsys):
    status = run_cli(["sweep", "--scenario", "plane_harmonic",
                      "--eps-list", "1e-1,3e-2", "--t1", "1",
                      "--out-dir", str(tmp_path), "--no-timestamp"])
    assert status == 0
    report = (tmp_path / "plane_harmonic_sweep.txt").read_text()
    assert "monotone = true" in report
    fields = dict(ln.split(" = ") for ln in report.splitlines()
                  if " = " in ln)
    assert float(fields["eps_1"]) == 0.1
    assert "sup_error_1" in fields and "fitted_rate" in fields
    assert (tmp_path / "plane_harmonic_effective.csv").exists()
    assert (tmp_path / "plane_harmonic_stiff_eps0.1.csv").exists()
    assert (tmp_path / "plane_harmonic_stiff_eps0.03.csv").exists()
    # smaller eps hugs the effective run tighter
    errs = [float(ln.split(" = ")[1]) for ln in report.splitlines()
            if ln.startswith("sup_error_")]
    assert errs[1] < errs[0]


def test_sweep_requires_eps_list(tmp_path, capsys):
    status = run_cli(["sweep", "--scenario", "plane_harmonic",
                      "--out-dir", str(tmp_path)])
    assert status == 1
    assert "eps-list" in read_err(capsys)["message"]


def test_diagnose_outputs(tmp_path, capsys):
    status = run_cli(["diagnose", "--scenario", "plane_harmonic",
                      "--eps", "0.01", "--t1", "2", "--window", "0.1",
                      "--out-dir", str(tmp_path), "--no-timestamp"])
    assert status == 0
    report = dict(
        line.split(" = ")
        for line in (tmp_path / "plane_harmonic_diagnose.txt")
        .read_text().splitlines() if " = " in line)
    assert report["scenario"] == "plane_harmonic"
    assert float(report["theta_launch"]) == 0.5
    # eps = 0.01 keeps this test quick; the averaging-window boundary
    # error then dominates both residuals, so the bounds are smoke-level
    # (test_diagnostics pins them down at eps = 1e-3)
    assert float(report["virial_residual"]) <= 0.15
    assert float(report["theta_rel_error"]) <= 0.15
    assert int(report["interior_samples"]) > 100
    series = (tmp_path / "plane_harmonic_weaklimits.csv").read_text()
    assert "# columns: t,sigma_hat,pi_hat,adiabatic" in series


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "job.toml"
    cfg.write_text('scenario = "plane_harmonic"\neps = 0.05\nt1 = 0.5\n'
                   'timestamp = false\n')
    status = run_cli(["run", "--config", str(cfg), "--eps", "0.1",
                      "--out-dir", str(tmp_path)])
    assert status == 0
    # flag eps wins, file t1 and timestamp stand
    path = tmp_path / "plane_harmonic_stiff_eps0.1.csv"
    traj = fileio.read_trajectory(path)
    assert traj.times[-1] == 0.5
    assert "timestamp" not in path.read_text()


def test_config_custom_block(tmp_path):
    cfg = tmp_path / "custom.toml"
    cfg.write_text(
        'eps = 0.1\nt1 = 0.5\ntimestamp = false\n'
        '[custom]\ndim = 2\nname = "ramp"\n'
        '[custom.f]\nform = "coordinate"\nindex = 1\n'
        '[custom.g]\nshape = "power"\nm = 1\n'
        '[custom.launch]\np = [0.0, 0.0]\nv = [0.0, 1.0]\n')
    status = run_cli(["run", "--config", str(cfg), "--out-dir",
                      str(tmp_path)])
    assert status == 0
    assert (tmp_path / "ramp_stiff_eps0.1.csv").exists()


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('scenario = "plane_harmonic"\nbogus = 1\n')
    status = run_cli(["run", "--config", str(cfg), "--eps", "0.1",
                      "--out-dir", str(tmp_path)])
    assert status == 1
    assert "bogus" in read_err(capsys)["message"]


def test_config_malformed_toml(tmp_path, capsys):
    cfg = tmp_path / "broken.toml"
    cfg.write_text("=== not toml ===\n")
    status = run_cli(["run", "--config", str(cfg), "--eps", "0.1",
                      "--out-dir", str(tmp_path)])
    assert status == 1
    assert "malformed" in read_err(capsys)["message"]


def test_config_missing_file(tmp_path, capsys):
    status = run_cli(["run", "--config", str(tmp_path / "nope.toml"),
                      "--eps", "0.1", "--out-dir", str(tmp_path)])
    assert status == 1
    assert "cannot read" in read_err(capsys)["message"]


def test_bad_launch_vector(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps", "0.1",
                      "--launch-v", "fast,slow", "--out-dir",
                      str(tmp_path)])
    assert status == 1
    assert read_err(capsys)["error"] == "ValidationError"


def test_inapplicable_shape_parameter(tmp_path, capsys):
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps", "0.1",
                      "--m", "3", "--out-dir", str(tmp_path)])
    assert status == 1
    assert "m" in read_err(capsys)["message"]


def test_help_exits_cleanly(capsys):
    assert run_cli(["--help"]) == 0
    assert "stifflab" in capsys.readouterr().out


def test_usage_errors_exit_one(capsys):
    assert run_cli(["run", "--bogus-flag"]) == 1
    assert run_cli([]) == 1
    capsys.readouterr()


def test_out_dir_environment_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("STIFFLAB_OUT_DIR", str(tmp_path / "envout"))
    status = run_cli(["run", "--scenario", "plane_harmonic", "--eps", "0.1",
                      "--t1", "0.5", "--no-timestamp"])
    assert status == 0
    assert (tmp_path / "envout" / "plane_harmonic_stiff_eps0.1.csv").exists()
