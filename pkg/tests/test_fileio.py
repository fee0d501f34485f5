import numpy as np
import numpy.testing as npt
import pytest

import stifflab as sl
from stifflab import fileio


@pytest.fixture(scope="module")
def short_run():
    sc = sl.builtin("plane_harmonic")
    p, v = sc.default_launch
    return sl.integrate_stiff(sc.metric, sc.potential, 0.1, p, v,
                              (0.0, 0.5))


def test_round_trip_is_bitwise(tmp_path, short_run):
    path = tmp_path / "run.csv"
    fileio.write_trajectory(short_run, path, timestamp=False)
    back = fileio.read_trajectory(path)
    for field in ("times", "xs", "vs", "energy", "r", "rdot", "t_perp",
                  "u_perp"):
        a = getattr(short_run, field)
        b = getattr(back, field)
        assert np.array_equal(a, b), field
    assert back.epsilon == short_run.epsilon
    assert back.n_steps == short_run.n_steps
    assert back.flags == []


def test_round_trip_reconstructs_h_r(short_run, tmp_path):
    # Tperp = h_r^2 rdot^2 / 2 inverts exactly except at rdot = 0
    path = tmp_path / "run.csv"
    fileio.write_trajectory(short_run, path, timestamp=False)
    back = fileio.read_trajectory(path)
    mask = short_run.rdot != 0.0
    assert mask.any()
    npt.assert_allclose(back.h_r[mask], short_run.h_r[mask], rtol=1e-12)


def test_effective_mode_round_trip(tmp_path):
    sc = sl.builtin("sphere_harmonic")
    p, v = sc.default_launch
    par = sl.adiabatic_invariant(sc.metric, sc.potential, p, v)
    tr = sl.integrate_effective(sc.metric, sc.potential, par, v, (0.0, 1.0))
    path = tmp_path / "eff.csv"
    fileio.write_trajectory(tr, path, scenario="sphere_harmonic",
                            timestamp=False)
    text = path.read_text()
    assert "# mode: effective" in text
    assert "# scenario: sphere_harmonic" in text
    assert "epsilon" not in text
    back = fileio.read_trajectory(path)
    assert back.epsilon is None
    assert np.array_equal(back.xs, tr.xs)


def test_timestamp_header_is_optional(tmp_path, short_run):
    with_ts = tmp_path / "a.csv"
    without = tmp_path / "b.csv"
    fileio.write_trajectory(short_run, with_ts)
    fileio.write_trajectory(short_run, without, timestamp=False)
    assert "# timestamp: " in with_ts.read_text()
    assert "timestamp" not in without.read_text()


def test_deterministic_output_bytes(tmp_path, short_run):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    fileio.write_trajectory(short_run, a, timestamp=False)
    fileio.write_trajectory(short_run, b, timestamp=False)
    assert a.read_bytes() == b.read_bytes()


def test_read_rejects_empty_and_malformed(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("# stifflab trajectory\n# columns: t\n")
    with pytest.raises(sl.ValidationError):
        fileio.read_trajectory(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0,3.0\n")
    with pytest.raises(sl.ValidationError):
        fileio.read_trajectory(bad)


def test_report_format(tmp_path):
    path = tmp_path / "report.txt"
    fileio.write_report(path, "sweep report",
                        [("scenario", "sphere_harmonic"), ("n_eps", 4),
                         ("rate", 2.0317829154)], timestamp=False)
    lines = path.read_text().splitlines()
    assert lines[0] == "# stifflab sweep report"
    assert "scenario = sphere_harmonic" in lines
    assert "n_eps = 4" in lines
    rate_line = [ln for ln in lines if ln.startswith("rate = ")][0]
    assert float(rate_line.split(" = ")[1]) == 2.0317829154


def test_series_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    t = np.linspace(0.0, 1.0, 17)
    a = rng.standard_normal(17) * 1e-7
    path = tmp_path / "series.csv"
    fileio.write_series(path, ["t", "sigma"], [t, a], timestamp=False)
    rows = [ln for ln in path.read_text().splitlines()
            if not ln.startswith("#")]
    parsed = np.array([[float(tok) for tok in ln.split(",")]
                       for ln in rows])
    assert np.array_equal(parsed[:, 0], t)
    assert np.array_equal(parsed[:, 1], a)


def test_column_names_scale_with_dimension():
    assert fileio.trajectory_columns(3) == [
        "t", "x1", "x2", "x3", "v1", "v2", "v3", "H", "r", "rdot",
        "Tperp", "Uperp"]


def test_fmt_is_exact_for_awkward_floats():
    for x in (1.0 / 3.0, np.pi, 1e-300, 7.1e17, 0.1 + 0.2):
        assert float(fileio.fmt(x)) == x
