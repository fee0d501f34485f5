"""Composed confining potentials U = g(f(x)) and the degeneracy parameter.

``ConstraintFunction`` carries the level-set function f whose zero set is
the constraint surface; ``ShapeFunction`` carries the scalar profile g
that shapes the well transverse to it.  The degeneracy parameter alpha is
the derivative at zero of e = g/g' after removing its singularity; it is
declared analytically by each scenario and cross-checked numerically by
``alpha_estimate``.
"""

import numpy as np

from .errors import DomainError, ShapeUnderflowError, ValidationError

#: |g'| below this during estimation counts as underflow (exp-flat shapes).
UNDERFLOW_TOL = 1e-300


class ConstraintFunction:
    """Scalar level-set function f with Euclidean derivatives.

    ``eval(x)`` and ``grad(x)`` are required; ``grad`` falls back to
    central differences of ``eval`` when not supplied.  ``hess(x)`` is
    optional and unlocks analytic distortion/curvature formulas.  The
    ``analytic`` flag records whether the derivatives are exact.
    """

    def __init__(self, dim, eval_fn, grad_fn=None, hess_fn=None, name=""):
        self.dim = int(dim)
        self.name = name
        self._eval = eval_fn
        self._grad = grad_fn
        self._hess = hess_fn
        self.analytic = grad_fn is not None

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(
                "point has shape %s, chart dimension is %d"
                % (x.shape, self.dim))
        if not np.all(np.isfinite(x)):
            raise DomainError("point has non-finite entries: %s" % x)
        return x

    def eval(self, x):
        return float(self._eval(np.asarray(x, dtype=float)))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        h = max(1e-5, 1e-5 * float(np.linalg.norm(x)))
        out = np.empty(self.dim)
        for k in range(self.dim):
            xp = x.copy()
            xm = x.copy()
            xp[k] += h
            xm[k] -= h
            out[k] = (self._eval(xp) - self._eval(xm)) / (2.0 * h)
        return out

    @property
    def hess(self):
        """Hessian callable or None; consumers branch on availability."""
        if self._hess is None:
            return None
        return self._hess_wrap

    def _hess_wrap(self, x):
        return np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float)


class ShapeFunction:
    """Well profile g with derivative, declared alpha, and optional e = g/g'.

    ``e_eval`` evaluates e with the singularity at 0 removed; supplying it
    is what keeps the alpha estimator usable for exponentially flat shapes
    whose g' underflows long before the probe reaches zero.
    """

    def __init__(self, eval_fn, deriv_fn=None, alpha=None, e_eval=None,
                 name=""):
        self._eval = eval_fn
        self._deriv = deriv_fn
        self.alpha = None if alpha is None else float(alpha)
        self.e_eval = e_eval
        self.name = name

    def eval(self, s):
        return float(self._eval(float(s)))

    def deriv(self, s):
        s = float(s)
        if self._deriv is not None:
            return float(self._deriv(s))
        h = max(1e-7, 1e-7 * abs(s))
        return (self._eval(s + h) - self._eval(s - h)) / (2.0 * h)


class PotentialSpec:
    """The composed potential U = g o f."""

    def __init__(self, f, g):
        self.f = f
        self.g = g

    def value(self, x):
        x = self.f.check_point(x)
        return self.g.eval(self.f.eval(x))

    def gradient(self, x):
        x = self.f.check_point(x)
        return self.g.deriv(self.f.eval(x)) * self.f.grad(x)


def potential_value(spec, x):
    """U(x) = g(f(x)); nonnegative by the shape-function hypothesis."""
    return spec.value(x)


def potential_gradient(spec, x):
    """Euclidean partials of U by the chain rule: g'(f(x)) grad f(x).

    Callers needing the metric gradient convert via geometry.grad_rho.
    """
    return spec.gradient(x)


def alpha_estimate(g, probe=1e-3):
    """Numerical estimate of alpha = e'(0) with e = g/g'.

    Evaluates q(s) = e(s)/s at s in {probe, probe/2, probe/4} and removes
    the O(s) and O(s^2) terms of q by two levels of Richardson
    extrapolation, so profiles with exactly linear e (all powers s^{2m})
    come out to machine precision.  Uses the shape's analytic ``e_eval``
    when present; otherwise forms g(s)/g'(s) directly and raises
    ``ShapeUnderflowError`` once |g'| drops below 1e-300, in which case
    the declared alpha is the only trustworthy value.
    """
    probe = float(probe)
    if not probe > 0.0:
        raise ValidationError("probe must be positive")
    q = []
    for s in (probe, probe / 2.0, probe / 4.0):
        if g.e_eval is not None:
            e = float(g.e_eval(s))
        else:
            gp = g.deriv(s)
            if abs(gp) < UNDERFLOW_TOL:
                raise ShapeUnderflowError(
                    "g' underflowed at s=%.3e (probe %.3e); "
                    "trust the declared alpha" % (s, probe))
            e = g.eval(s) / gp
        q.append(e / s)
    t1 = 2.0 * q[1] - q[0]
    t2 = 2.0 * q[2] - q[1]
    return (4.0 * t2 - t1) / 3.0
