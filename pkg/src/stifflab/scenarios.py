"""Builtin and custom scenario bundles: metric + potential + launch data.

A Scenario packages everything an experiment needs: the ambient metric,
the composed potential U = g(f(x)), a default launch, and the working
radial interval [-r_max, r_max] on which the shape hypothesis (g
nonnegative, vanishing only at 0, with e = g/g' regular) is validated.

The constraint functions and shape profiles are assembled from a small
set of named forms.  ``custom`` builds from the same forms as the
builtins, so a custom config that mirrors a builtin reproduces its
output bit for bit.
"""

import numpy as np

from . import potential as _pot
from .dynamics import constraint_project
from .errors import (
    ProjectionError,
    ShapeUnderflowError,
    UnknownScenarioError,
    ValidationError,
)
from .geometry import MetricField
from .potential import ConstraintFunction, PotentialSpec, ShapeFunction

BUILTIN_NAMES = ("sphere_harmonic", "ellipsoid_quartic", "flat_axis_m",
                 "exp_degenerate", "plane_harmonic")


class Scenario:
    """Immutable bundle: name, metric, potential, default launch, r_max."""

    __slots__ = ("name", "metric", "potential", "default_launch", "r_max",
                 "notes", "params")

    def __init__(self, name, metric, potential, default_launch, r_max,
                 notes="", params=None):
        self.name = name
        self.metric = metric
        self.potential = potential
        p, v = default_launch
        self.default_launch = (np.asarray(p, dtype=float),
                               np.asarray(v, dtype=float))
        self.r_max = float(r_max)
        self.notes = notes
        self.params = dict(params) if params else {}

    @property
    def alpha(self):
        return self.potential.g.alpha

    @property
    def dim(self):
        return self.metric.dim

    def __repr__(self):
        return "Scenario(%r, dim=%d, alpha=%s)" % (self.name, self.dim,
                                                   self.alpha)


# ---------------------------------------------------------------------------
# Named constraint-function forms.

def _quadric_constraint(coeffs):
    """f(x) = sum_i c_i x_i^2 - 1 with analytic gradient and Hessian."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValidationError("quadric coefficients must be a vector, "
                              "length >= 2")
    if not np.all(np.isfinite(c)):
        raise ValidationError("quadric coefficients must be finite")
    dim = c.size
    hess_mat = np.diag(2.0 * c)

    def feval(x):
        return float(np.dot(c, x * x) - 1.0)

    def fgrad(x):
        return 2.0 * c * x

    def fhess(x):
        return hess_mat

    return ConstraintFunction(dim, feval, fgrad, fhess, name="quadric")


def _axis_exp_constraint():
    """f(x, y) = y exp(x^2): a level set flat along the x axis."""

    def feval(x):
        return float(x[1] * np.exp(x[0] * x[0]))

    def fgrad(x):
        e = np.exp(x[0] * x[0])
        return np.array([2.0 * x[0] * x[1] * e, e])

    def fhess(x):
        e = np.exp(x[0] * x[0])
        fxx = 2.0 * x[1] * (1.0 + 2.0 * x[0] * x[0]) * e
        fxy = 2.0 * x[0] * e
        return np.array([[fxx, fxy], [fxy, 0.0]])

    return ConstraintFunction(2, feval, fgrad, fhess, name="axis_exp")


def _coordinate_constraint(dim, index):
    """f(x) = x_index: a flat hyperplane constraint."""
    dim = int(dim)
    index = int(index)
    if not 0 <= index < dim:
        raise ValidationError("coordinate index %d outside dimension %d"
                              % (index, dim))
    grad = np.zeros(dim)
    grad[index] = 1.0
    hess = np.zeros((dim, dim))

    def feval(x):
        return float(x[index])

    return ConstraintFunction(dim, feval, lambda x: grad.copy(),
                              lambda x: hess, name="coordinate")


_CONSTRAINT_FORMS = {
    "quadric": lambda cfg: _quadric_constraint(cfg["coeffs"]),
    "axis_exp": lambda cfg: _axis_exp_constraint(),
    "coordinate": lambda cfg: _coordinate_constraint(cfg["dim"],
                                                     cfg.get("index", 0)),
}


# ---------------------------------------------------------------------------
# Named shape-function forms.

def _power_shape(m, scale=1.0):
    """g(s) = scale * s^(2m); e = g/g' = s/(2m), so alpha = 1/(2m)."""
    m = int(m)
    if m < 1:
        raise ValidationError("power shape needs m >= 1")
    scale = float(scale)
    two_m = 2 * m

    def geval(s):
        return scale * s ** two_m

    def gderiv(s):
        return scale * two_m * s ** (two_m - 1)

    def e_eval(s):
        return s / two_m

    return ShapeFunction(geval, gderiv, alpha=1.0 / two_m, e_eval=e_eval,
                         name="power(m=%d)" % m)


def _exp_flat_shape(a, b, m):
    """g(s) = a exp(-b s^(-2m)) for s != 0, g(0) = 0: infinitely flat.

    e = g/g' = s^(2m+1)/(2 m b) exactly, hence alpha = e'(0) = 0.  g'
    underflows to zero well before s does, so the analytic e is the only
    usable route for the degeneracy estimator.
    """
    a = float(a)
    b = float(b)
    m = int(m)
    if a <= 0.0 or b <= 0.0 or m < 1:
        raise ValidationError("exp-flat shape needs a > 0, b > 0, m >= 1")
    two_m = 2 * m

    def geval(s):
        if s == 0.0:
            return 0.0
        return a * np.exp(-b * s ** -two_m)

    def gderiv(s):
        if s == 0.0:
            return 0.0
        return a * np.exp(-b * s ** -two_m) * (two_m * b * s ** (-two_m - 1))

    def e_eval(s):
        return s ** (two_m + 1) / (two_m * b)

    return ShapeFunction(geval, gderiv, alpha=0.0, e_eval=e_eval,
                         name="exp_flat(a=%g, b=%g, m=%d)" % (a, b, m))


_SHAPE_FORMS = {
    "power": lambda cfg: _power_shape(cfg.get("m", 1),
                                      cfg.get("scale", 1.0)),
    "exp_flat": lambda cfg: _exp_flat_shape(cfg.get("a", 1.0),
                                            cfg.get("b", 1.0),
                                            cfg.get("m", 2)),
}


# ---------------------------------------------------------------------------
# Validation helpers.

def _validate_shape(g, r_max):
    """Sample the shape hypothesis on the working interval."""
    if abs(g.eval(0.0)) > 0.0:
        raise ValidationError("shape function must vanish at 0")
    ss = np.linspace(-r_max, r_max, 41)
    for s in ss:
        val = g.eval(s)
        if not np.isfinite(val):
            raise ValidationError("shape function not finite at s=%g" % s)
        if val < 0.0:
            raise ValidationError(
                "shape function negative at s=%g (g=%g); the well profile "
                "must be nonnegative" % (s, val))
    # away from zero it must actually confine
    for s in (r_max, -r_max, r_max / 2.0, -r_max / 2.0):
        if not g.eval(s) > 0.0:
            raise ValidationError(
                "shape function vanishes at s=%g != 0" % s)


def _validate_alpha(g, probe=1e-3):
    if g.alpha is None or g.alpha < 0.0:
        raise ValidationError("scenario must declare alpha >= 0")
    try:
        est = _pot.alpha_estimate(g, probe=probe)
    except ShapeUnderflowError:
        return  # exponential flatness: trust the declared value
    if abs(est - g.alpha) > 1e-3:
        raise ValidationError(
            "declared alpha %g disagrees with the numerical estimate %g"
            % (g.alpha, est))


def _validate_regular_value(metric, spec, p, n_samples=32, seed=20260822):
    """Check nonvanishing Euclidean grad f at sampled points near [f = 0]."""
    rng = np.random.default_rng(seed)
    f = spec.f
    points = [np.asarray(p, dtype=float)]
    for _ in range(n_samples):
        q = p + 0.2 * rng.standard_normal(f.dim)
        try:
            q = constraint_project(metric, spec, q, max_iter=25)
        except ProjectionError:
            continue
        points.append(q)
    for q in points:
        if float(np.linalg.norm(f.grad(q))) <= 1e-8:
            raise ValidationError(
                "0 is not a regular value of f: gradient vanishes near the "
                "constraint at %s" % q)


def _finish(name, metric, f, g, launch_p, launch_v, r_max, notes, params):
    spec = PotentialSpec(f, g)
    _validate_shape(g, r_max)
    _validate_alpha(g)
    p = np.asarray(launch_p, dtype=float)
    v = np.asarray(launch_v, dtype=float)
    if p.shape != (metric.dim,) or v.shape != (metric.dim,):
        raise ValidationError("launch point/velocity must have dimension %d"
                              % metric.dim)
    try:
        p = constraint_project(metric, spec, p)
    except ProjectionError as exc:
        raise ValidationError(
            "default launch point cannot be placed on the constraint: %s"
            % exc)
    _validate_regular_value(metric, spec, p)
    return Scenario(name, metric, spec, (p, v), r_max, notes, params)


# ---------------------------------------------------------------------------
# Builtins.

def builtin(name, m=None, a=None, b=None):
    """Return a fully analytic builtin scenario by name.

    ``flat_axis_m`` accepts the exponent ``m`` (default 2);
    ``exp_degenerate`` accepts ``a``, ``b``, ``m`` (defaults 1, 1, 2).
    Passing a parameter to a scenario that does not take it is an error.
    """
    if name not in BUILTIN_NAMES:
        raise UnknownScenarioError(
            "unknown scenario %r; available: %s"
            % (name, ", ".join(BUILTIN_NAMES)))
    if name not in ("flat_axis_m", "exp_degenerate") and m is not None:
        raise ValidationError("scenario %r takes no parameter m" % name)
    if name != "exp_degenerate" and (a is not None or b is not None):
        raise ValidationError("scenario %r takes no parameters a/b" % name)

    if name == "sphere_harmonic":
        return _finish(
            name, MetricField.euclidean(3),
            _quadric_constraint([1.0, 1.0, 1.0]), _power_shape(1),
            (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.5,
            "unit sphere, harmonic well; nondegenerate reference case",
            {})
    if name == "ellipsoid_quartic":
        return _finish(
            name, MetricField.euclidean(3),
            _quadric_constraint([1.0, 2.0, 3.0]), _power_shape(2),
            (1.0, 0.0, 0.0), (1.0, 0.7, 0.0), 0.5,
            "triaxial ellipsoid with a quartic well; the distortion force "
            "vanishes only at the six axis points",
            {})
    if name == "flat_axis_m":
        mm = 2 if m is None else int(m)
        return _finish(
            name, MetricField.euclidean(2), _axis_exp_constraint(),
            _power_shape(mm),
            (0.0, 0.0), (0.4, 1.0), 0.5,
            "level set of y exp(x^2); gradient norm grows along the axis, "
            "trapping the slow motion in a potential well",
            {"m": mm})
    if name == "exp_degenerate":
        aa = 1.0 if a is None else float(a)
        bb = 1.0 if b is None else float(b)
        mm = 2 if m is None else int(m)
        return _finish(
            name, MetricField.euclidean(2),
            _coordinate_constraint(2, 1), _exp_flat_shape(aa, bb, mm),
            (0.0, 0.0), (0.5, 2.0), 0.8,
            "flat constraint with an infinitely degenerate well: all "
            "transverse energy stays kinetic in the stiff limit",
            {"a": aa, "b": bb, "m": mm})
    # plane_harmonic
    return _finish(
        name, MetricField.euclidean(2), _coordinate_constraint(2, 1),
        _power_shape(1),
        (0.0, 0.0), (0.0, 1.0), 0.5,
        "1-D transverse harmonic oscillator with a closed-form solution",
        {})


# ---------------------------------------------------------------------------
# Custom scenarios from config.

def _build_metric(dim, cfg):
    form = cfg.get("form", "euclidean")
    if form == "euclidean":
        return MetricField.euclidean(dim)
    if form == "constant":
        entries = cfg.get("entries")
        if entries is None:
            raise ValidationError("constant metric needs 'entries'")
        mat = np.asarray(entries, dtype=float)
        if mat.shape != (dim, dim):
            raise ValidationError("metric entries must be %dx%d" % (dim, dim))
        scale = 1.0 + float(np.abs(mat).max())
        if float(np.abs(mat - mat.T).max()) > 1e-12 * scale:
            raise ValidationError("metric entries must be symmetric")
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            raise ValidationError(
                "metric entries are not positive definite")
        return MetricField.from_matrix(mat)
    raise ValidationError("unknown metric form %r" % form)


def custom(config):
    """Assemble a Scenario from a nested configuration mapping.

    Expected keys: ``dim``; ``metric`` (``form`` = ``euclidean`` or
    ``constant`` with ``entries``); ``f`` (``form`` = ``quadric`` with
    ``coeffs``, ``axis_exp``, or ``coordinate`` with ``index``); ``g``
    (``shape`` = ``power`` with ``m``/``scale`` or ``exp_flat`` with
    ``a``/``b``/``m``, optional declared ``alpha``); ``launch`` with
    ``p`` and ``v``; optional ``r_max`` (default 0.5) and ``name``.

    Raises ``ValidationError`` for a non-positive-definite metric, a
    shape that goes negative on the working interval, a declared alpha
    inconsistent with the numerical estimate, or a constraint whose
    gradient vanishes near its zero set.
    """
    if not isinstance(config, dict):
        raise ValidationError("custom scenario config must be a mapping")
    try:
        dim = int(config["dim"])
    except KeyError:
        raise ValidationError("custom scenario config needs 'dim'")
    if dim < 2:
        raise ValidationError("dim must be at least 2")

    metric = _build_metric(dim, config.get("metric", {}))

    fcfg = dict(config.get("f", {}))
    fform = fcfg.get("form")
    if fform not in _CONSTRAINT_FORMS:
        raise ValidationError(
            "unknown constraint form %r; available: %s"
            % (fform, ", ".join(sorted(_CONSTRAINT_FORMS))))
    fcfg.setdefault("dim", dim)
    f = _CONSTRAINT_FORMS[fform](fcfg)
    if f.dim != dim:
        raise ValidationError(
            "constraint form %r has dimension %d, config says %d"
            % (fform, f.dim, dim))

    gcfg = dict(config.get("g", {}))
    gshape = gcfg.get("shape")
    if gshape not in _SHAPE_FORMS:
        raise ValidationError(
            "unknown shape %r; available: %s"
            % (gshape, ", ".join(sorted(_SHAPE_FORMS))))
    g = _SHAPE_FORMS[gshape](gcfg)
    declared = gcfg.get("alpha")
    if declared is not None and abs(float(declared) - g.alpha) > 1e-6:
        raise ValidationError(
            "declared alpha %g does not match the shape's analytic value %g"
            % (float(declared), g.alpha))

    launch = config.get("launch", {})
    if "p" not in launch or "v" not in launch:
        raise ValidationError("custom scenario config needs launch.p and "
                              "launch.v")
    r_max = float(config.get("r_max", 0.5))
    if not r_max > 0.0:
        raise ValidationError("r_max must be positive")
    name = config.get("name", "custom")
    return _finish(name, metric, f, g, launch["p"], launch["v"], r_max,
                   config.get("notes", ""), {"form": fform, "shape": gshape})
