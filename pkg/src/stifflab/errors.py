"""Exception hierarchy.

Two broad families matter to callers (and to the CLI exit code):
``ValidationError`` for bad inputs/configuration and ``NumericalError``
for failures arising during computation.
"""


class StiffLabError(Exception):
    """Base class for all stifflab errors."""


class ValidationError(StiffLabError):
    """Invalid configuration, parameters, or preconditions."""


class DomainError(ValidationError):
    """Point outside the chart domain (wrong dimension, non-finite entries)."""


class UnknownScenarioError(ValidationError):
    """Requested builtin scenario name does not exist."""


class WindowError(ValidationError):
    """Averaging window too small or too large for the trajectory."""


class TangencyError(ValidationError):
    """Velocity required to be tangential to the constraint is not."""


class NumericalError(StiffLabError):
    """Base class for runtime numerical failures."""


class SingularMetricError(NumericalError):
    """Cholesky factorization of the metric matrix failed."""


class CriticalPointError(NumericalError):
    """Gradient norm below tolerance where a nonzero gradient is required."""


class ShapeUnderflowError(NumericalError):
    """g' underflowed during the degeneracy-parameter estimate.

    Raised for exponentially flat shape functions probed without an
    analytic ``e_eval``; the caller should fall back to the declared alpha.
    """


class StepSizeCollapseError(NumericalError):
    """Adaptive integrator step size fell below the hard minimum."""


class ProjectionError(NumericalError):
    """Newton projection onto the constraint surface failed to converge."""
