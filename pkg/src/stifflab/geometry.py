"""Metric-dependent differential geometry on an ambient chart domain.

Everything here works in a single global chart: points are coordinate
vectors in R^n and the Riemannian structure enters through a point
dependent symmetric positive-definite matrix G(x).  The module supplies
the pieces the integrators and diagnostics need: metric gradients,
Christoffel symbols, orthogonal velocity splittings with respect to a
level-set normal, and the equipotential distortion field

    kappa(x) = tangential part of grad log ||grad f(x)||

which measures how fast neighbouring level sets of f change shape.
All operations are pure functions; metric objects are immutable after
construction and safe to share between concurrent integrations.
"""

import numpy as np

from .errors import (
    CriticalPointError,
    SingularMetricError,
    ValidationError,
)

# Tolerances used throughout.  CRIT_TOL is the gradient-norm threshold below
# which a point counts as critical; SYM_TOL bounds the allowed asymmetry of a
# user-supplied metric matrix.
CRIT_TOL = 1e-12
SYM_TOL = 1e-12


def _fd_step(x, scale):
    """Central-difference step size, floored away from zero."""
    return max(scale, scale * float(np.linalg.norm(x)))


class MetricField:
    """Point-dependent Riemannian metric on an n-dimensional chart.

    Parameters
    ----------
    dim : int
        Chart dimension, at least 2.
    mat_fn : callable or None
        ``mat_fn(x) -> (dim, dim) array`` returning the metric components
        g_ab at ``x``.  ``None`` together with ``matrix`` declares a
        constant metric.
    partials_fn : callable or None
        Optional ``partials_fn(x) -> (dim, dim, dim) array`` with entry
        ``[k, a, b] = d g_ab / d x_k``.  When absent, partial derivatives
        fall back to central finite differences of ``mat_fn``.
    matrix : array or None
        Constant metric matrix; mutually exclusive with ``mat_fn``.

    A constant metric is factorized once at construction; its Christoffel
    symbols vanish identically, which the integrators exploit.
    """

    def __init__(self, dim, mat_fn=None, partials_fn=None, matrix=None):
        if dim < 2:
            raise ValidationError("metric dimension must be at least 2")
        self.dim = int(dim)
        if (mat_fn is None) == (matrix is None):
            raise ValidationError("provide exactly one of mat_fn or matrix")
        self._mat_fn = mat_fn
        self._partials_fn = partials_fn
        if matrix is not None:
            m = np.array(matrix, dtype=float)
            self._check_shape_sym(m)
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError:
                raise SingularMetricError(
                    "constant metric matrix is not positive definite")
            self.constant = True
            self._matrix = m
            self._inv = np.linalg.inv(m)
        else:
            self.constant = False
            self._matrix = None
            self._inv = None

    @classmethod
    def euclidean(cls, dim):
        """The flat metric: identity matrix, zero Christoffel symbols."""
        return cls(dim, matrix=np.eye(dim))

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix.shape[0], matrix=matrix)

    def _check_shape_sym(self, m):
        if m.shape != (self.dim, self.dim):
            raise ValidationError(
                "metric matrix has shape %s, expected (%d, %d)"
                % (m.shape, self.dim, self.dim))
        scale = 1.0 + float(np.abs(m).max())
        if float(np.abs(m - m.T).max()) > SYM_TOL * scale:
            raise ValidationError("metric matrix is not symmetric")

    def mat(self, x):
        """Metric components G(x); validated symmetric."""
        if self.constant:
            return self._matrix
        m = np.asarray(self._mat_fn(np.asarray(x, dtype=float)), dtype=float)
        self._check_shape_sym(m)
        return m

    def inv_matrix(self, x=None):
        """Inverse metric G(x)^{-1} (cached for constant metrics)."""
        if self.constant:
            return self._inv
        m = self.mat(x)
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise SingularMetricError(
                "metric factorization failed at x=%s" % (np.asarray(x),))
        return np.linalg.inv(m)

    def inv_apply(self, x, w):
        """G(x)^{-1} w — raises the index of a covector."""
        return self.inv_matrix(x).dot(np.asarray(w, dtype=float))

    def inner(self, x, u, w):
        """Metric inner product <u, w> at x."""
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        return float(u.dot(self.mat(x).dot(w)))

    def norm(self, x, w):
        """Metric norm ||w|| at x."""
        val = self.inner(x, w, w)
        # roundoff can push a zero-norm product slightly negative
        return float(np.sqrt(val)) if val > 0.0 else 0.0

    def partials(self, x):
        """d g_ab / d x_k as a (dim, dim, dim) array, index k first.

        Constant metrics return zeros.  Without analytic partials the
        derivatives are central differences with step max(1e-5, 1e-5 |x|).
        """
        n = self.dim
        if self.constant:
            return np.zeros((n, n, n))
        x = np.asarray(x, dtype=float)
        if self._partials_fn is not None:
            d = np.asarray(self._partials_fn(x), dtype=float)
            if d.shape != (n, n, n):
                raise ValidationError(
                    "metric partials have shape %s, expected %s"
                    % (d.shape, (n, n, n)))
            return d
        h = _fd_step(x, 1e-5)
        d = np.empty((n, n, n))
        for k in range(n):
            xp = x.copy()
            xm = x.copy()
            xp[k] += h
            xm[k] -= h
            d[k] = (self.mat(xp) - self.mat(xm)) / (2.0 * h)
        return d


class AmbientState:
    """A (position, velocity, time) triple in chart coordinates."""

    __slots__ = ("x", "v", "t")

    def __init__(self, x, v, t=0.0):
        self.x = np.asarray(x, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.t = float(t)
        if self.x.shape != self.v.shape or self.x.ndim != 1:
            raise ValidationError("state position/velocity shape mismatch")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))
                and np.isfinite(self.t)):
            raise ValidationError("state entries must be finite")

    def __repr__(self):
        return "AmbientState(x=%s, v=%s, t=%g)" % (self.x, self.v, self.t)


class DistortionSample:
    """Equipotential distortion kappa and gradient norm at one point."""

    __slots__ = ("x", "kappa", "grad_norm")

    def __init__(self, x, kappa, grad_norm):
        self.x = np.asarray(x, dtype=float)
        self.kappa = np.asarray(kappa, dtype=float)
        self.grad_norm = float(grad_norm)

    def __repr__(self):
        return "DistortionSample(x=%s, kappa=%s, grad_norm=%g)" % (
            self.x, self.kappa, self.grad_norm)


def grad_rho(fld, metric, x):
    """Metric gradient of a scalar field: G(x)^{-1} times its partials.

    ``fld`` must expose ``grad(x)`` returning the Euclidean partial
    derivatives.  The returned vector satisfies
    <grad_rho f, w> = df(w) for every direction w.
    """
    x = np.asarray(x, dtype=float)
    return metric.inv_apply(x, fld.grad(x))


def christoffel(metric, x):
    """Christoffel symbols of the second kind, shape (dim, dim, dim).

    Entry [a, m, n] is Gamma^a_{mn} = (1/2) g^{ab} (g_bm,n + g_bn,m - g_mn,b),
    symmetric in (m, n).  Constant metrics give identically zero.
    """
    n = metric.dim
    if metric.constant:
        return np.zeros((n, n, n))
    x = np.asarray(x, dtype=float)
    d = metric.partials(x)  # d[k, a, b] = g_ab,k
    ginv = metric.inv_matrix(x)
    # bracket[b, m, n] = g_bm,n + g_bn,m - g_mn,b
    bracket = (np.transpose(d, (1, 2, 0))
               + np.transpose(d, (1, 0, 2))
               - d)
    return 0.5 * np.einsum("ab,bmn->amn", ginv, bracket)


def split_velocity(metric, x, grad_rho_f, v):
    """Orthogonal splitting of v relative to the level-set normal.

    ``grad_rho_f`` is the metric gradient of the level function at ``x``
    (i.e. the output of :func:`grad_rho`).  Returns ``(v_par, v_perp)``
    where v_perp is the component along the unit normal
    n = grad_rho_f / ||grad_rho_f|| in the metric at ``x`` and
    v_par = v - v_perp is tangential: <v_par, v_perp> = 0.

    Raises ``CriticalPointError`` when the gradient norm is below 1e-12.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(grad_rho_f, dtype=float)
    v = np.asarray(v, dtype=float)
    gmat = metric.mat(x)
    s2 = float(g.dot(gmat.dot(g)))
    if not s2 > CRIT_TOL ** 2:
        raise CriticalPointError(
            "gradient norm %.3e below tolerance at x=%s"
            % (np.sqrt(max(s2, 0.0)), x))
    coeff = float(v.dot(gmat.dot(g))) / s2
    v_perp = coeff * g
    return v - v_perp, v_perp


def _grad_norm_field(metric, fspec, x):
    """||grad_rho f(x)|| as a plain scalar (used for FD differentiation)."""
    g = fspec.grad(x)
    return float(np.sqrt(max(g.dot(metric.inv_apply(x, g)), 0.0)))


def equipotential_distortion(metric, fspec, x):
    """Distortion field kappa(x) = (grad_rho ||grad_rho f||)_par / ||grad_rho f||.

    Differentiates the gradient norm itself and divides afterwards, which
    avoids amplification from log of a small number.  When ``fspec``
    carries an analytic Hessian the derivative of the norm is assembled
    exactly (including metric partial terms for non-constant metrics);
    otherwise central differences with step max(1e-4, 1e-4 |x|) are used.

    kappa is orthogonal to grad_rho f by construction, and is invariant
    under reparametrizations f -> lambda(f) with lambda' > 0.
    """
    x = np.asarray(x, dtype=float)
    gradf = fspec.grad(x)
    grho = metric.inv_apply(x, gradf)
    s2 = float(gradf.dot(grho))
    s = np.sqrt(s2) if s2 > 0.0 else 0.0
    if s <= CRIT_TOL:
        raise CriticalPointError(
            "distortion undefined at critical point x=%s" % x)

    hess = getattr(fspec, "hess", None)
    if hess is not None:
        # d_k s^2 = 2 (G^{-1} grad f) . H[:, k]  -  grad f . dG^{-1}[k] . grad f
        # with dG^{-1}[k] = -G^{-1} dG[k] G^{-1}.
        hmat = hess(x)
        ds2 = 2.0 * hmat.dot(grho)
        if not metric.constant:
            dg = metric.partials(x)  # [k, a, b]
            ds2 = ds2 - np.einsum("a,kab,b->k", grho, dg, grho)
        dnorm = ds2 / (2.0 * s)
    else:
        h = _fd_step(x, 1e-4)
        n = x.size
        dnorm = np.empty(n)
        for k in range(n):
            xp = x.copy()
            xm = x.copy()
            xp[k] += h
            xm[k] -= h
            dnorm[k] = (_grad_norm_field(metric, fspec, xp)
                        - _grad_norm_field(metric, fspec, xm)) / (2.0 * h)

    grad_s = metric.inv_apply(x, dnorm)
    tang, _ = split_velocity(metric, x, grho, grad_s)
    return DistortionSample(x, tang / s, s)
