"""Embedded Dormand-Prince 5(4) integrator with output-grid landing.

Small, deterministic, and tailored to what the dynamics module needs:

* a hard step-size cap (the stiff runs cap at eps/10 so the fast
  transverse oscillation is always resolved),
* exact landing on a prescribed output grid by clipping steps (no dense
  output interpolation, so recorded states are genuine solution states —
  this is what lets the effective integrator keep |f| <= 1e-12 at every
  recorded sample),
* an optional ``post_step`` hook applied after each accepted step
  (constraint projection); when active, FSAL reuse is disabled because
  the hook may move the state.

Error control is the standard scaled RMS norm with a PI-free controller:
factor 0.9 err^(-1/5), clamped to [0.2, 5].
"""

import numpy as np

from .errors import StepSizeCollapseError

# Butcher tableau (Dormand & Prince 1980, the RKDP 5(4) pair).
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                      64448.0 / 6561.0, -212.0 / 729.0)
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                           46732.0 / 5247.0, 49.0 / 176.0,
                           -5103.0 / 18656.0)
# 5th-order weights (b2 = 0); the 7th stage evaluates at the new point.
B1, B3, B4, B5, B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                      -2187.0 / 6784.0, 11.0 / 84.0)
# Difference between the 5th- and embedded 4th-order weights.
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

MIN_STEP = 1e-14


def integrate(rhs, t_span, y0, out_times, rtol=1e-10, atol=1e-10,
              max_step=np.inf, post_step=None):
    """Integrate y' = rhs(t, y), recording y exactly at ``out_times``.

    ``out_times`` must be increasing with out_times[0] == t_span[0] and
    out_times[-1] == t_span[1].  Returns ``(Y, stats)`` where Y has one
    row per output time and stats counts accepted/rejected steps and
    right-hand-side evaluations.

    Raises ``StepSizeCollapseError`` if the controller drives the step
    below 1e-14 (typically a sign the right-hand side has gone bad).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    out_times = np.asarray(out_times, dtype=float)
    y = np.array(y0, dtype=float)
    ndof = y.size
    Y = np.empty((out_times.size, ndof))
    Y[0] = y

    n_accept = 0
    n_reject = 0
    n_eval = 1
    k1 = np.asarray(rhs(t0, y), dtype=float)

    t = t0
    h_prop = min(max_step, (t1 - t0) / 100.0)
    oi = 1
    while oi < out_times.size:
        target = float(out_times[oi])
        # Snap when the remaining sliver is at roundoff scale.
        if target - t <= 1e-12 * max(1.0, abs(target)):
            t = target
            Y[oi] = y
            oi += 1
            continue

        h = min(h_prop, max_step, target - t)
        if h < MIN_STEP:
            raise StepSizeCollapseError(
                "step size %.3e collapsed at t=%.6g" % (h, t))

        k2 = rhs(t + C2 * h, y + h * (A21 * k1))
        k3 = rhs(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = rhs(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = rhs(t + C5 * h,
                 y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = rhs(t + h,
                 y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4
                          + A65 * k5))
        y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = np.asarray(rhs(t + h, y_new), dtype=float)
        n_eval += 6

        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6
                       + E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if not np.isfinite(err):
            # Right-hand side produced NaN/Inf; retreat hard.
            n_reject += 1
            h_prop = h * 0.2
            continue

        if err <= 1.0:
            clipped = h < min(h_prop, max_step) * (1.0 - 1e-12)
            t = t + h
            y = y_new
            n_accept += 1
            if post_step is not None:
                y = post_step(t, y)
                k1 = np.asarray(rhs(t, y), dtype=float)
                n_eval += 1
            else:
                k1 = k7
            if target - t <= 1e-12 * max(1.0, abs(target)):
                t = target
                Y[oi] = y
                oi += 1
            if not clipped:
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h_prop = h * fac
            # else: keep the standing proposal; the clip told us nothing
            # about accuracy at full size.
        else:
            n_reject += 1
            fac = max(0.2, min(1.0, 0.9 * err ** -0.2))
            h_prop = h * fac

    stats = {"n_accept": n_accept, "n_reject": n_reject, "n_eval": n_eval}
    return Y, stats
