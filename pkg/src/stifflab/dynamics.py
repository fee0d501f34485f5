"""Stiff and effective dynamics.

Two second-order systems live here, both integrated by the shared
embedded Runge-Kutta pair in ``_rk``:

* the stiff system in ambient coordinates,

      xdd = -Gamma(xd, xd) - eps^-2 g'(f(x)) G^{-1} grad f(x),

  whose solutions oscillate rapidly across the constraint surface
  [f = 0] with total energy H = ||xd||^2/2 + eps^-2 g(f(x)) conserved;

* the effective limit system on the constraint surface,

      xdd = -Gamma(xd, xd) - theta ||grad f||^(2/(2 alpha + 1)) kappa(x)
            + lambda grad_rho f(x),

  where the multiplier lambda cancels the normal component so the motion
  stays on [f = 0], and theta is the adiabatic invariant fixed by the
  launch data.  theta multiplied by (alpha + 1/2) times the gradient-norm
  power is the effective potential; its tangential gradient reproduces
  the kappa force term.

The effective integrator keeps the constraint exact (|f| <= 1e-12) by a
Newton projection after every accepted step, followed by removal of the
normal velocity component.
"""

import numpy as np

from . import _rk
from .errors import (
    CriticalPointError,
    ProjectionError,
    TangencyError,
    ValidationError,
)
from .geometry import (
    CRIT_TOL,
    AmbientState,
    christoffel,
    equipotential_distortion,
    split_velocity,
)

#: |f| at or below this counts as "on the constraint" for launch points.
ON_TOL = 1e-10
#: Newton projection target for the effective integrator.
PROJ_TOL = 1e-12
#: Looser on-surface tolerance for pointwise effective-potential queries.
EVAL_ON_TOL = 1e-8

DEFAULT_TOL = 1e-10
DEFAULT_ENERGY_TOL = 1e-6
DEFAULT_N_OUT = 2001


class EffectiveParams:
    """Data defining the limit dynamics for one launch.

    alpha is the shape degeneracy parameter, theta >= 0 the adiabatic
    invariant, base_point the (on-constraint) launch position and
    base_grad_norm = ||grad_rho f|| there.  theta vanishes exactly when
    the launch velocity was tangential.
    """

    __slots__ = ("alpha", "theta", "base_point", "base_grad_norm")

    def __init__(self, alpha, theta, base_point, base_grad_norm):
        self.alpha = float(alpha)
        self.theta = float(theta)
        self.base_point = np.asarray(base_point, dtype=float)
        self.base_grad_norm = float(base_grad_norm)
        if self.theta < 0.0:
            raise ValidationError("theta must be nonnegative")
        if not self.base_grad_norm > 0.0:
            raise ValidationError("base gradient norm must be positive")

    def __repr__(self):
        return ("EffectiveParams(alpha=%g, theta=%.12g, base_point=%s, "
                "base_grad_norm=%.12g)" % (self.alpha, self.theta,
                                           self.base_point,
                                           self.base_grad_norm))


class Trajectory:
    """Integration output: states plus per-sample diagnostics.

    Arrays, all aligned with ``times``:

    - ``xs``, ``vs``: positions and velocities, shape (n_samples, dim);
    - ``energy``: conserved energy (stiff: kinetic + eps^-2 g(r);
      effective: kinetic + effective potential);
    - ``r``: constraint value f(x);
    - ``rdot``: its time derivative, the Euclidean pairing grad f . v;
    - ``t_perp``: transverse kinetic energy h_r^2 rdot^2 / 2 with
      h_r = 1/||grad_rho f||;
    - ``u_perp``: transverse potential eps^-2 g(r) (identically zero for
      effective runs, which live on [f = 0]);
    - ``h_r``: the radial scale factor itself (NaN where the trajectory
      passed within tolerance of a critical point of f; such runs carry
      the flag ``"critical-point-masked"``).

    ``epsilon`` is None for effective runs.  ``flags`` collects failure
    markers such as ``"energy-drift"``; a clean run has an empty list.
    """

    def __init__(self, times, xs, vs, energy, r, rdot, t_perp, u_perp, h_r,
                 epsilon=None, flags=None, n_steps=0, projection_shift=0.0):
        self.times = np.asarray(times, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.vs = np.asarray(vs, dtype=float)
        self.energy = np.asarray(energy, dtype=float)
        self.r = np.asarray(r, dtype=float)
        self.rdot = np.asarray(rdot, dtype=float)
        self.t_perp = np.asarray(t_perp, dtype=float)
        self.u_perp = np.asarray(u_perp, dtype=float)
        self.h_r = np.asarray(h_r, dtype=float)
        self.epsilon = None if epsilon is None else float(epsilon)
        self.flags = list(flags) if flags else []
        self.n_steps = int(n_steps)
        self.projection_shift = float(projection_shift)

    def __len__(self):
        return self.times.size

    def state(self, i):
        return AmbientState(self.xs[i], self.vs[i], self.times[i])

    @property
    def dim(self):
        return self.xs.shape[1]

    @property
    def energy_drift(self):
        """max |H(t) - H(0)| / |H(0)| over the output grid."""
        h0 = self.energy[0]
        return float(np.max(np.abs(self.energy - h0)) / max(abs(h0), 1e-300))

    @property
    def ok(self):
        return not self.flags


def _require_positive(value, name):
    if not (np.isfinite(value) and value > 0.0):
        raise ValidationError("%s must be positive, got %r" % (name, value))


def _span(t_span):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
        raise ValidationError("t_span must satisfy t1 > t0")
    return t0, t1


def constraint_project(metric, spec, x, tol=PROJ_TOL, max_iter=10):
    """Project x onto [f = 0] by Newton steps along grad_rho f.

    Converges quadratically from anywhere with |f| modestly small
    (|f| <= 0.1 is safe for all builtin scenarios).  Raises
    ``ProjectionError`` if |f| > tol still holds after ``max_iter``
    updates or a step degenerates (vanishing gradient).
    """
    f = spec.f
    xc = f.check_point(x).copy()
    for _ in range(max_iter):
        fx = f.eval(xc)
        if abs(fx) <= tol:
            return xc
        gradf = f.grad(xc)
        d = metric.inv_apply(xc, gradf)
        denom = float(gradf.dot(d))
        if not (np.isfinite(denom) and denom > 0.0):
            raise ProjectionError(
                "projection stalled at x=%s (gradient degenerate)" % xc)
        xc = xc - (fx / denom) * d
    if abs(f.eval(xc)) <= tol:
        return xc
    raise ProjectionError(
        "Newton projection did not reach |f| <= %g in %d iterations "
        "(|f| = %.3e)" % (tol, max_iter, abs(f.eval(xc))))


def stiff_acceleration(metric, spec, eps, state):
    """Right-hand side of the stiff second-order system at one state."""
    _require_positive(eps, "eps")
    x = spec.f.check_point(state.x)
    v = np.asarray(state.v, dtype=float)
    gp = spec.g.deriv(spec.f.eval(x))
    acc = (-1.0 / (eps * eps) * gp) * metric.inv_apply(x, spec.f.grad(x))
    if not metric.constant:
        gam = christoffel(metric, x)
        acc = acc - gam.dot(v).dot(v)
    return acc


def _make_stiff_rhs(metric, spec, eps):
    n = metric.dim
    feval = spec.f.eval
    fgrad = spec.f.grad
    gderiv = spec.g.deriv
    ie2 = 1.0 / (eps * eps)
    if metric.constant:
        ginv = metric.inv_matrix(None)

        def rhs(t, y):
            x = y[:n]
            out = np.empty(2 * n)
            out[:n] = y[n:]
            out[n:] = (-ie2 * gderiv(feval(x))) * ginv.dot(fgrad(x))
            return out
    else:

        def rhs(t, y):
            x = y[:n]
            v = y[n:]
            gam = christoffel(metric, x)
            acc = -gam.dot(v).dot(v)
            gp = gderiv(feval(x))
            if gp != 0.0:
                acc = acc - (ie2 * gp) * metric.inv_apply(x, fgrad(x))
            out = np.empty(2 * n)
            out[:n] = v
            out[n:] = acc
            return out

    return rhs


def _default_n_out(eps, alpha):
    # Degenerate shapes oscillate slowly; densify the grid so windowed
    # averages downstream resolve full oscillations.
    if eps is not None and eps < 1e-2 and alpha is not None and alpha < 0.1:
        return 2 * (DEFAULT_N_OUT - 1) + 1
    return DEFAULT_N_OUT


def _assemble(metric, spec, times, Y, eps=None, params=None, flags=None,
              n_steps=0, projection_shift=0.0):
    """Evaluate per-sample diagnostics and build the Trajectory."""
    n = metric.dim
    xs = Y[:, :n].copy()
    vs = Y[:, n:].copy()
    m = times.size
    energy = np.empty(m)
    r = np.empty(m)
    rdot = np.empty(m)
    h_r = np.empty(m)
    u_perp = np.zeros(m)
    f, g = spec.f, spec.g
    const = metric.constant
    if const:
        gmat = metric.mat(None)
        ginv = metric.inv_matrix(None)
    masked = False
    ie2 = None if eps is None else 1.0 / (eps * eps)
    if params is not None:
        expo_inv = 1.0 / (2.0 * params.alpha + 1.0)
        ueff_coeff = params.theta * (params.alpha + 0.5)
    for i in range(m):
        x = xs[i]
        v = vs[i]
        fx = f.eval(x)
        gradf = f.grad(x)
        r[i] = fx
        rdot[i] = float(gradf.dot(v))
        if const:
            kinetic = 0.5 * float(v.dot(gmat.dot(v)))
            grho = ginv.dot(gradf)
        else:
            kinetic = 0.5 * metric.inner(x, v, v)
            grho = metric.inv_apply(x, gradf)
        s2 = float(gradf.dot(grho))
        if s2 > CRIT_TOL ** 2:
            h_r[i] = 1.0 / np.sqrt(s2)
        else:
            h_r[i] = np.nan
            masked = True
        if ie2 is not None:
            u_perp[i] = ie2 * g.eval(fx)
            energy[i] = kinetic + u_perp[i]
        elif params is not None:
            energy[i] = kinetic + ueff_coeff * s2 ** expo_inv
        else:
            energy[i] = kinetic
    t_perp = 0.5 * h_r ** 2 * rdot ** 2
    flags = list(flags) if flags else []
    if masked:
        flags.append("critical-point-masked")
    return Trajectory(times, xs, vs, energy, r, rdot, t_perp, u_perp, h_r,
                      epsilon=eps, flags=flags, n_steps=n_steps,
                      projection_shift=projection_shift)


def integrate_stiff(metric, spec, eps, p, v, t_span, tol=DEFAULT_TOL,
                    energy_tol=DEFAULT_ENERGY_TOL, n_out=None, atol=None):
    """Integrate the stiff system from (p, v) over t_span.

    The adaptive 5(4) pair runs with relative/absolute tolerance ``tol``
    (``atol`` overrides the absolute part) and a hard step cap of eps/10,
    which resolves the transverse oscillation for every shape degeneracy.
    Launch points with |f(p)| > 1e-10 are projected onto the constraint
    first; the moved distance is recorded as ``projection_shift``.

    Diagnostics are recorded on a uniform grid of ``n_out`` samples
    (default 2001, doubled for eps < 1e-2 with alpha < 0.1).  If the
    relative energy drift exceeds ``energy_tol`` the run is flagged
    ``"energy-drift"`` rather than raised, so sweeps can report partial
    failures.
    """
    eps = float(eps)
    _require_positive(eps, "eps")
    _require_positive(tol, "tol")
    t0, t1 = _span(t_span)
    p = spec.f.check_point(p)
    v = np.asarray(v, dtype=float)
    AmbientState(p, v, t0)  # validates shapes/finiteness
    projection_shift = 0.0
    if abs(spec.f.eval(p)) > ON_TOL:
        p_new = constraint_project(metric, spec, p)
        projection_shift = float(np.linalg.norm(p_new - p))
        p = p_new
    if n_out is None:
        n_out = _default_n_out(eps, spec.g.alpha)
    out_times = np.linspace(t0, t1, int(n_out))
    y0 = np.concatenate([p, v])
    rhs = _make_stiff_rhs(metric, spec, eps)
    Y, stats = _rk.integrate(rhs, (t0, t1), y0, out_times, rtol=tol,
                             atol=tol if atol is None else atol,
                             max_step=eps / 10.0)
    traj = _assemble(metric, spec, out_times, Y, eps=eps,
                     n_steps=stats["n_accept"],
                     projection_shift=projection_shift)
    if traj.energy_drift > energy_tol:
        traj.flags.append("energy-drift")
    return traj


def adiabatic_invariant(metric, spec, p, v):
    """Split the launch velocity and form the adiabatic invariant theta.

    theta = ||v_perp||^2 ||grad_rho f(p)||^(-2/(2 alpha + 1)) / (2 alpha + 1),

    the windowed limit of h_r^(2 + 2/(2 alpha + 1)) times the mean squared
    radial velocity.  At t = 0 the transverse energy is ||v_perp||^2 / 2
    exactly, which fixes the 1/(2 alpha + 1) normalization; the measured
    invariant along stiff trajectories (diagnostics.adiabatic_series)
    matches this value, as does the harmonic closed-form average.
    Tangential launches give theta = 0 exactly.
    """
    p = spec.f.check_point(p)
    v = np.asarray(v, dtype=float)
    if abs(spec.f.eval(p)) > ON_TOL:
        raise ValidationError(
            "launch point has |f| = %.3e > %g; project it first"
            % (abs(spec.f.eval(p)), ON_TOL))
    gradf = spec.f.grad(p)
    grho = metric.inv_apply(p, gradf)
    s2 = float(gradf.dot(grho))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError("launch point is critical for f")
    s = float(np.sqrt(s2))
    _, v_perp = split_velocity(metric, p, grho, v)
    vperp2 = max(metric.inner(p, v_perp, v_perp), 0.0)
    alpha = spec.g.alpha
    two_a1 = 2.0 * alpha + 1.0
    theta = vperp2 * s ** (-2.0 / two_a1) / two_a1
    return EffectiveParams(alpha, theta, p, s)


def effective_potential(metric, spec, params, x):
    """theta (alpha + 1/2) ||grad_rho f(x)||^(2/(2 alpha + 1)) on [f = 0]."""
    x = spec.f.check_point(x)
    if abs(spec.f.eval(x)) > EVAL_ON_TOL:
        raise ValidationError(
            "effective potential queried off the constraint (|f| = %.3e)"
            % abs(spec.f.eval(x)))
    gradf = spec.f.grad(x)
    grho = metric.inv_apply(x, gradf)
    s2 = float(gradf.dot(grho))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError("critical point of f at x=%s" % x)
    return (params.theta * (params.alpha + 0.5)
            * s2 ** (1.0 / (2.0 * params.alpha + 1.0)))


def _second_directional(f, x, v):
    """v^T Hess(f) v, analytic when available, else via grad differences."""
    hess = f.hess
    if hess is not None:
        return float(v.dot(hess(x).dot(v)))
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        return 0.0
    vu = v / vn
    h = max(1e-5, 1e-5 * float(np.linalg.norm(x)))
    dgrad = (f.grad(x + h * vu) - f.grad(x - h * vu)) / (2.0 * h)
    return vn * float(v.dot(dgrad))


def _effective_accel(metric, spec, params, x, v):
    """Constrained effective acceleration (no precondition checks)."""
    f = spec.f
    gradf = f.grad(x)
    grho = metric.inv_apply(x, gradf)
    s2 = float(gradf.dot(grho))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError("critical point of f at x=%s" % x)
    a0 = np.zeros_like(x)
    if not metric.constant:
        gam = christoffel(metric, x)
        a0 = a0 - gam.dot(v).dot(v)
    if params.theta != 0.0:
        ds = equipotential_distortion(metric, f, x)
        expo = 2.0 / (2.0 * params.alpha + 1.0)
        a0 = a0 - (params.theta * ds.grad_norm ** expo) * ds.kappa
    vhv = _second_directional(f, x, v)
    lam = -(vhv + float(gradf.dot(a0))) / s2
    return a0 + lam * grho


def effective_acceleration(metric, spec, params, state):
    """Acceleration of the effective system at an on-constraint state.

    The tangential force is -theta ||grad_rho f||^(2/(2 alpha + 1)) kappa,
    equal to minus the tangential metric gradient of the effective
    potential; the Lagrange-multiplier term along grad_rho f cancels the
    constraint curvature so that f(x(t)) stays constant to second order.
    Requires |f(x)| <= 1e-8 and a tangential velocity.
    """
    x = spec.f.check_point(state.x)
    v = np.asarray(state.v, dtype=float)
    if abs(spec.f.eval(x)) > EVAL_ON_TOL:
        raise ValidationError(
            "state is off the constraint (|f| = %.3e)" % abs(spec.f.eval(x)))
    gradf = spec.f.grad(x)
    grho = metric.inv_apply(x, gradf)
    s2 = float(gradf.dot(grho))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError("critical point of f at x=%s" % x)
    vnorm = metric.norm(x, v)
    if vnorm > 0.0:
        normal_rate = abs(float(gradf.dot(v)))
        if normal_rate > EVAL_ON_TOL * vnorm * np.sqrt(s2):
            raise TangencyError(
                "velocity has a normal component (<v, n> = %.3e)"
                % (normal_rate / np.sqrt(s2)))
    return _effective_accel(metric, spec, params, x, v)


def _make_effective_rhs(metric, spec, params):
    n = metric.dim
    f = spec.f
    theta = params.theta
    expo = 2.0 / (2.0 * params.alpha + 1.0)
    if metric.constant and f.hess is not None:
        # Fast path: constant metric and analytic Hessian let the
        # distortion force be assembled with a handful of mat-vecs.
        ginv = metric.inv_matrix(None)
        fgrad = f.grad
        fhess = f.hess

        def rhs(t, y):
            x = y[:n]
            v = y[n:]
            gradf = fgrad(x)
            grho = ginv.dot(gradf)
            s2 = float(gradf.dot(grho))
            if not s2 > CRIT_TOL ** 2:
                raise CriticalPointError(
                    "effective dynamics reached a critical point of f")
            hmat = fhess(x)
            if theta != 0.0:
                s = np.sqrt(s2)
                dnorm = hmat.dot(grho) / s
                grad_s = ginv.dot(dnorm)
                tang = grad_s - (float(dnorm.dot(grho)) / s2) * grho
                a0 = (-theta * s ** expo / s) * tang
            else:
                a0 = np.zeros(n)
            vhv = float(v.dot(hmat.dot(v)))
            lam = -(vhv + float(gradf.dot(a0))) / s2
            out = np.empty(2 * n)
            out[:n] = v
            out[n:] = a0 + lam * grho
            return out
    else:

        def rhs(t, y):
            x = y[:n]
            v = y[n:]
            acc = _effective_accel(metric, spec, params, x, v)
            out = np.empty(2 * n)
            out[:n] = v
            out[n:] = acc
            return out

    return rhs


def _make_projection_hook(metric, spec):
    n = metric.dim
    f = spec.f

    def post_step(t, y):
        x = y[:n].copy()
        v = y[n:].copy()
        for _ in range(10):
            fx = f.eval(x)
            if abs(fx) <= PROJ_TOL:
                break
            gradf = f.grad(x)
            d = metric.inv_apply(x, gradf)
            denom = float(gradf.dot(d))
            if not (np.isfinite(denom) and denom > 0.0):
                raise ProjectionError(
                    "post-step projection stalled at t=%.6g" % t)
            x = x - (fx / denom) * d
        if abs(f.eval(x)) > PROJ_TOL:
            raise ProjectionError(
                "post-step projection did not converge at t=%.6g" % t)
        gradf = f.grad(x)
        d = metric.inv_apply(x, gradf)
        s2 = float(gradf.dot(d))
        v = v - (float(gradf.dot(v)) / s2) * d
        out = np.empty(2 * n)
        out[:n] = x
        out[n:] = v
        return out

    return post_step


def integrate_effective(metric, spec, params, v_par, t_span, tol=DEFAULT_TOL,
                        energy_tol=DEFAULT_ENERGY_TOL, n_out=None, atol=None):
    """Integrate the effective limit system on the constraint surface.

    Starts at ``params.base_point`` with the tangential velocity
    ``v_par`` (a residual normal component up to the tangency tolerance
    is removed exactly).  Same adaptive scheme as the stiff integrator
    but without the eps/10 cap; every accepted step is followed by Newton
    reprojection onto [f = 0] (at most 10 iterations to |f| <= 1e-12) and
    tangential reprojection of the velocity.  The conserved quantity here
    is kinetic energy plus the effective potential.
    """
    _require_positive(tol, "tol")
    t0, t1 = _span(t_span)
    p = spec.f.check_point(params.base_point)
    v = np.asarray(v_par, dtype=float)
    AmbientState(p, v, t0)
    if abs(spec.f.eval(p)) > ON_TOL:
        raise ValidationError(
            "base point has |f| = %.3e > %g" % (abs(spec.f.eval(p)), ON_TOL))
    gradf = spec.f.grad(p)
    grho = metric.inv_apply(p, gradf)
    s2 = float(gradf.dot(grho))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError("base point is critical for f")
    vnorm = metric.norm(p, v)
    normal_rate = abs(float(gradf.dot(v)))
    if vnorm > 0.0 and normal_rate > EVAL_ON_TOL * vnorm * np.sqrt(s2):
        raise TangencyError(
            "launch velocity is not tangential (<v, n> = %.3e)"
            % (normal_rate / np.sqrt(s2)))
    v = v - (float(gradf.dot(v)) / s2) * grho
    if n_out is None:
        n_out = DEFAULT_N_OUT
    out_times = np.linspace(t0, t1, int(n_out))
    y0 = np.concatenate([p, v])
    rhs = _make_effective_rhs(metric, spec, params)
    hook = _make_projection_hook(metric, spec)
    Y, stats = _rk.integrate(rhs, (t0, t1), y0, out_times, rtol=tol,
                             atol=tol if atol is None else atol,
                             post_step=hook)
    traj = _assemble(metric, spec, out_times, Y, eps=None, params=params,
                     n_steps=stats["n_accept"])
    if traj.energy_drift > energy_tol:
        traj.flags.append("energy-drift")
    return traj
