"""Windowed weak-limit estimates and epsilon-sweep convergence studies.

The fast transverse oscillation of a stiff trajectory carries two slowly
varying averages: sigma (the mean transverse potential eps^-2 g(r)) and
pi (the mean squared radial velocity rdot^2).  Flat-kernel moving
averages over a window much wider than the oscillation period but much
shorter than the slow motion estimate both.  Derived combinations:

* virial residual -- how far 2 alpha <T_perp> = <U_perp> is from holding;
* adiabatic series -- h_r^(2 + 2/(2 alpha + 1)) pi_hat, which should sit
  at the constant theta fixed by the launch data.

``convergence_study`` integrates the stiff system across an epsilon list
plus the effective system once and reports sup-distances on a shared
grid with a log-log fitted rate.
"""

import numpy as np

from .dynamics import adiabatic_invariant, integrate_effective, \
    integrate_stiff, constraint_project, ON_TOL
from .errors import NumericalError, ValidationError, WindowError
from .geometry import split_velocity

_WINDOW_SLACK = 1.0 + 1e-12


class WeakLimitEstimate:
    """Windowed averages sigma_hat, pi_hat on the interior time grid.

    The grid excludes one window half-width at each end, so every average
    uses a full symmetric window.  Both series are averages of
    nonnegative quantities and are nonnegative up to roundoff.
    """

    __slots__ = ("times", "sigma_hat", "pi_hat", "window")

    def __init__(self, times, sigma_hat, pi_hat, window):
        self.times = np.asarray(times, dtype=float)
        self.sigma_hat = np.asarray(sigma_hat, dtype=float)
        self.pi_hat = np.asarray(pi_hat, dtype=float)
        self.window = float(window)
        if np.any(self.sigma_hat < -1e-12) or np.any(self.pi_hat < -1e-12):
            raise ValidationError("windowed averages came out negative")


class ConvergenceReport:
    """Per-epsilon sup distances to the effective solution."""

    __slots__ = ("eps_list", "sup_errors", "monotone", "fitted_rate",
                 "flags")

    def __init__(self, eps_list, sup_errors, monotone, fitted_rate,
                 flags=None):
        self.eps_list = np.asarray(eps_list, dtype=float)
        self.sup_errors = np.asarray(sup_errors, dtype=float)
        self.monotone = bool(monotone)
        self.fitted_rate = float(fitted_rate)
        self.flags = list(flags) if flags else []


def _window_samples(traj, window):
    """Half-width in samples; validates the window against the run."""
    if traj.epsilon is None:
        raise ValidationError("weak limits require a stiff trajectory")
    window = float(window)
    t0, t1 = traj.times[0], traj.times[-1]
    span = t1 - t0
    if window * _WINDOW_SLACK < 10.0 * traj.epsilon:
        raise WindowError(
            "window %.3g too small: need at least 10 eps = %.3g"
            % (window, 10.0 * traj.epsilon))
    if window > span / 10.0 * _WINDOW_SLACK:
        raise WindowError(
            "window %.3g too large: at most a tenth of the span (%.3g)"
            % (window, span / 10.0))
    dt = span / (traj.times.size - 1)
    m = int(round(window / dt))
    if m < 1:
        raise WindowError("window %.3g shorter than the output spacing"
                          % window)
    return m


def _boxcar(series, m):
    """Flat moving average over 2m+1 samples; output trims m per end."""
    c = np.concatenate(([0.0], np.cumsum(series)))
    w = 2 * m + 1
    return (c[w:] - c[:-w]) / w


def weak_limits(traj, window=0.1):
    """Boxcar averages of eps^-2 g(r) and rdot^2 along a stiff run.

    ``window`` is the averaging half-width in time units; it must cover
    at least ten epsilon (so several fast oscillations fit) and at most a
    tenth of the trajectory span.
    """
    m = _window_samples(traj, window)
    sigma_hat = _boxcar(traj.u_perp, m)
    pi_hat = _boxcar(traj.rdot ** 2, m)
    # roundoff guard: these are means of squares
    np.clip(sigma_hat, 0.0, None, out=sigma_hat)
    np.clip(pi_hat, 0.0, None, out=pi_hat)
    return WeakLimitEstimate(traj.times[m:traj.times.size - m],
                             sigma_hat, pi_hat, window)


def _smoothed_hr_power(traj, m, power):
    """Boxcar of h_r^power on the same window as the weak-limit series.

    h_r is evaluated off the constraint along a stiff run, so it carries
    a small fast jitter; averaging it on the same window keeps the
    estimator consistent with sigma_hat/pi_hat, which are averages too.
    """
    return _boxcar(traj.h_r ** power, m)


def virial_residual(est, traj, alpha):
    """Worst-case interior residual of the weak virial relation.

    Returns max |2 alpha <T_perp> - <U_perp>| / max(<E_perp>, 1e-12)
    with <T_perp> = <h_r^2> pi_hat / 2 and <U_perp> = sigma_hat.
    """
    m = _window_samples(traj, est.window)
    t_hat = 0.5 * _smoothed_hr_power(traj, m, 2.0) * est.pi_hat
    e_hat = t_hat + est.sigma_hat
    resid = np.abs(2.0 * alpha * t_hat - est.sigma_hat)
    return float(np.max(resid / np.maximum(e_hat, 1e-12)))


def adiabatic_series(est, traj, alpha):
    """The invariant combination h_r^(2 + 2/(2 alpha + 1)) pi_hat."""
    m = _window_samples(traj, est.window)
    power = 2.0 + 2.0 / (2.0 * alpha + 1.0)
    return _smoothed_hr_power(traj, m, power) * est.pi_hat


def adiabatic_residual(est, traj, alpha):
    """(max - min)/mean of the invariant series over the interior grid.

    Near zero when the transverse oscillation is adiabatic; pi_hat alone
    is not invariant whenever the gradient norm varies along the slow
    motion, only this combination is.
    """
    series = adiabatic_series(est, traj, alpha)
    mean = float(np.mean(series))
    if mean == 0.0:
        return 0.0
    return float((np.max(series) - np.min(series)) / mean)


def convergence_study(scenario, p, v, eps_list, t_span, tol=1e-10,
                      return_runs=False):
    """Sup-distance of stiff runs to the effective solution per epsilon.

    Runs the stiff integrator for each entry of the strictly decreasing
    ``eps_list`` and the effective integrator once (the launch velocity
    is split at the projected launch point; its normal part fixes theta,
    its tangential part seeds the effective run).  All trajectories are
    interpolated onto the effective run's uniform grid; the report holds
    the per-epsilon sup of the Euclidean coordinate distance, a strict
    monotonicity flag, and the least-squares slope of log error against
    log epsilon.

    Integrator failures for individual epsilon values are recorded in
    ``report.flags`` (with NaN errors) instead of aborting the study.
    With ``return_runs=True`` returns ``(report, runs)`` where ``runs``
    maps each epsilon to its trajectory plus ``"effective"``.
    """
    eps_arr = np.asarray(eps_list, dtype=float)
    if eps_arr.size < 2:
        raise ValidationError("eps_list needs at least two entries")
    if np.any(eps_arr <= 0.0) or np.any(np.diff(eps_arr) >= 0.0):
        raise ValidationError("eps_list must be positive, strictly "
                              "decreasing")
    metric, spec = scenario.metric, scenario.potential
    if p is None or v is None:
        dp, dv = scenario.default_launch
        p = dp if p is None else p
        v = dv if v is None else v
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(spec.f.eval(p)) > ON_TOL:
        p = constraint_project(metric, spec, p)
    params = adiabatic_invariant(metric, spec, p, v)
    gradf = spec.f.grad(p)
    grho = metric.inv_apply(p, gradf)
    v_par, _ = split_velocity(metric, p, grho, v)
    eff = integrate_effective(metric, spec, params, v_par, t_span, tol=tol)

    grid = eff.times
    runs = {"effective": eff}
    sup_errors = np.empty(eps_arr.size)
    flags = []
    if eff.flags:
        flags.extend("effective: %s" % fl for fl in eff.flags)
    for i, eps in enumerate(eps_arr):
        try:
            traj = integrate_stiff(metric, spec, eps, p, v, t_span, tol=tol)
        except NumericalError as exc:
            sup_errors[i] = np.nan
            flags.append("eps=%g: %s" % (eps, exc))
            continue
        runs[float(eps)] = traj
        if traj.flags:
            flags.extend("eps=%g: %s" % (eps, fl) for fl in traj.flags)
        diff2 = np.zeros(grid.size)
        for k in range(traj.dim):
            xk = np.interp(grid, traj.times, traj.xs[:, k])
            diff2 += (xk - eff.xs[:, k]) ** 2
        sup_errors[i] = float(np.sqrt(np.max(diff2)))

    good = np.isfinite(sup_errors)
    monotone = bool(np.all(good) and np.all(np.diff(sup_errors) < 0.0))
    if np.count_nonzero(good) >= 2:
        fitted_rate = float(np.polyfit(np.log(eps_arr[good]),
                                       np.log(np.maximum(sup_errors[good],
                                                         1e-300)), 1)[0])
    else:
        fitted_rate = float("nan")
        flags.append("too few successful runs for a rate fit")
    report = ConvergenceReport(eps_arr, sup_errors, monotone, fitted_rate,
                               flags)
    if return_runs:
        return report, runs
    return report
