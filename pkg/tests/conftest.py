"""Shared fixtures: the expensive stiff reference runs.

Everything here is session-scoped because the eps=1e-3 trajectories take
seconds to tens of seconds each; the unit tests and the acceptance tests
both read from the same runs.  Integrator tolerances are 1e-12 on the
smallest-eps runs so that energy drift stays two orders below the 1e-6
budget the suite asserts against.
"""

import time

import numpy as np
import pytest

import stifflab as sl
from stifflab import dynamics

# The eps ladder used by the convergence studies.
EPS_LIST = [1e-1, 3e-2, 1e-2, 3e-3]


@pytest.fixture(scope="session")
def sphere_study():
    """Tangential sphere launches over [0, 3] at the four ladder eps."""
    sc = sl.builtin("sphere_harmonic")
    p, v = sc.default_launch
    runs = {}
    t0 = time.perf_counter()
    for eps in EPS_LIST:
        runs[eps] = sl.integrate_stiff(sc.metric, sc.potential, eps, p, v,
                                       (0.0, 3.0))
    elapsed = time.perf_counter() - t0
    return {"scenario": sc, "runs": runs, "elapsed": elapsed,
            "launch": (p, v)}


@pytest.fixture(scope="session")
def ellipsoid_study():
    """Mixed-velocity ellipsoid sweep over [0, 2] plus the effective run."""
    sc = sl.builtin("ellipsoid_quartic")
    p, v = sc.default_launch
    t0 = time.perf_counter()
    report, runs = sl.convergence_study(sc, p, v, EPS_LIST, (0.0, 2.0),
                                        return_runs=True)
    elapsed = time.perf_counter() - t0
    return {"scenario": sc, "report": report, "runs": runs,
            "elapsed": elapsed, "launch": (p, v)}


@pytest.fixture(scope="session")
def plane_run():
    sc = sl.builtin("plane_harmonic")
    p, v = sc.default_launch
    traj = sl.integrate_stiff(sc.metric, sc.potential, 1e-3, p, v,
                              (0.0, 2.0), tol=1e-12)
    return {"scenario": sc, "traj": traj, "eps": 1e-3}


@pytest.fixture(scope="session")
def flat_run():
    # Long span: serves both the windowed virial average and the
    # Hill-region trapping check (several slow oscillation periods).
    sc = sl.builtin("flat_axis_m", m=2)
    p, v = sc.default_launch
    traj = sl.integrate_stiff(sc.metric, sc.potential, 1e-3, p, v,
                              (0.0, 20.0), tol=1e-12)
    return {"scenario": sc, "traj": traj, "eps": 1e-3}


@pytest.fixture(scope="session")
def exp_run():
    # The exponentially flat well confines only logarithmically, so the
    # transverse bounce period is O(1); the 13-unit span holds enough
    # bounces for a 1.3-wide averaging window.
    sc = sl.builtin("exp_degenerate")
    p, v = sc.default_launch
    traj = sl.integrate_stiff(sc.metric, sc.potential, 1e-3, p, v,
                              (0.0, 13.0), tol=1e-12)
    return {"scenario": sc, "traj": traj, "eps": 1e-3}


@pytest.fixture(scope="session")
def ellipsoid_normal_run():
    """Ellipsoid with a normal velocity component: the invariant-series
    workhorse (grad-norm varies along the path, so pi_hat must vary while
    the combination stays flat)."""
    sc = sl.builtin("ellipsoid_quartic")
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([1.0, 0.7, 0.0])
    traj = sl.integrate_stiff(sc.metric, sc.potential, 1e-3, p, v,
                              (0.0, 6.0), tol=1e-12)
    params = dynamics.adiabatic_invariant(sc.metric, sc.potential, p, v)
    return {"scenario": sc, "traj": traj, "eps": 1e-3, "params": params,
            "launch": (p, v)}


@pytest.fixture(scope="session")
def sphere_normal_run():
    """Purely normal sphere launch: constant grad norm, so the windowed
    averages have clean closed-form limits (sigma 1/4, pi 2)."""
    sc = sl.builtin("sphere_harmonic")
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([1.0, 0.0, 0.0])
    traj = sl.integrate_stiff(sc.metric, sc.potential, 1e-3, p, v,
                              (0.0, 2.0), tol=1e-12)
    params = dynamics.adiabatic_invariant(sc.metric, sc.potential, p, v)
    return {"scenario": sc, "traj": traj, "eps": 1e-3, "params": params,
            "launch": (p, v)}


@pytest.fixture(scope="session")
def effective_runs(ellipsoid_study):
    """Every effective trajectory the suite produces, for the constraint
    maintenance sweep."""
    out = [("ellipsoid_quartic", ellipsoid_study["runs"]["effective"])]

    sp = sl.builtin("sphere_harmonic")
    p, v = sp.default_launch
    par = dynamics.adiabatic_invariant(sp.metric, sp.potential, p, v)
    out.append(("sphere_harmonic",
                dynamics.integrate_effective(sp.metric, sp.potential, par,
                                             v, (0.0, 3.0))))

    fl = sl.builtin("flat_axis_m", m=2)
    pf, vf = fl.default_launch
    parf = dynamics.adiabatic_invariant(fl.metric, fl.potential, pf, vf)
    out.append(("flat_axis_m",
                dynamics.integrate_effective(fl.metric, fl.potential, parf,
                                             np.array([vf[0], 0.0]),
                                             (0.0, 12.0))))
    return out


@pytest.fixture(scope="session")
def stiff_fixture_runs(sphere_study, ellipsoid_study, plane_run, flat_run,
                       exp_run, ellipsoid_normal_run):
    """Label -> (Trajectory, metric) for every stiff run behind the
    geodesic, effective-convergence, virial, invariant, and trapping
    checks."""
    out = []
    for eps, tr in sphere_study["runs"].items():
        out.append(("sphere eps=%g" % eps, tr,
                    sphere_study["scenario"].metric))
    for eps, tr in ellipsoid_study["runs"].items():
        if eps == "effective":
            continue
        out.append(("ellipsoid eps=%g" % eps, tr,
                    ellipsoid_study["scenario"].metric))
    out.append(("plane eps=1e-3", plane_run["traj"],
                plane_run["scenario"].metric))
    out.append(("flat eps=1e-3", flat_run["traj"],
                flat_run["scenario"].metric))
    out.append(("exp eps=1e-3", exp_run["traj"],
                exp_run["scenario"].metric))
    out.append(("ellipsoid-normal eps=1e-3", ellipsoid_normal_run["traj"],
                ellipsoid_normal_run["scenario"].metric))
    return out
