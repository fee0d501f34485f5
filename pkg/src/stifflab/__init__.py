"""stifflab: a numerical laboratory for stiff constrained Lagrangian systems.

The package integrates strongly-forced Lagrangian dynamics whose potential
vanishes on a hypersurface, integrates the limiting constrained dynamics
with its curvature-induced effective potential, and measures weak limits of
the fast transverse oscillation (virial and adiabatic diagnostics,
epsilon-convergence studies).
"""

from .errors import (
    StiffLabError,
    ValidationError,
    DomainError,
    UnknownScenarioError,
    WindowError,
    TangencyError,
    NumericalError,
    SingularMetricError,
    CriticalPointError,
    ShapeUnderflowError,
    StepSizeCollapseError,
    ProjectionError,
)
from .geometry import (
    MetricField,
    AmbientState,
    DistortionSample,
    grad_rho,
    christoffel,
    split_velocity,
    equipotential_distortion,
)
from .potential import (
    ConstraintFunction,
    ShapeFunction,
    PotentialSpec,
    potential_value,
    potential_gradient,
    alpha_estimate,
)
from .dynamics import (
    EffectiveParams,
    Trajectory,
    constraint_project,
    stiff_acceleration,
    integrate_stiff,
    adiabatic_invariant,
    effective_potential,
    effective_acceleration,
    integrate_effective,
)
from .diagnostics import (
    WeakLimitEstimate,
    ConvergenceReport,
    weak_limits,
    virial_residual,
    adiabatic_series,
    adiabatic_residual,
    convergence_study,
)
from .scenarios import Scenario, BUILTIN_NAMES, builtin, custom
from .fileio import (
    write_trajectory,
    read_trajectory,
    write_report,
    write_series,
    trajectory_columns,
)

__version__ = "0.1.0"

__all__ = [
    "StiffLabError", "ValidationError", "DomainError",
    "UnknownScenarioError", "WindowError", "TangencyError",
    "NumericalError", "SingularMetricError", "CriticalPointError",
    "ShapeUnderflowError", "StepSizeCollapseError", "ProjectionError",
    "MetricField", "AmbientState", "DistortionSample", "grad_rho",
    "christoffel", "split_velocity", "equipotential_distortion",
    "ConstraintFunction", "ShapeFunction", "PotentialSpec",
    "potential_value", "potential_gradient", "alpha_estimate",
    "EffectiveParams", "Trajectory", "constraint_project",
    "stiff_acceleration", "integrate_stiff", "adiabatic_invariant",
    "effective_potential", "effective_acceleration", "integrate_effective",
    "WeakLimitEstimate", "ConvergenceReport", "weak_limits",
    "virial_residual", "adiabatic_series", "adiabatic_residual",
    "convergence_study",
    "Scenario", "BUILTIN_NAMES", "builtin", "custom",
    "write_trajectory", "read_trajectory", "write_report", "write_series",
    "trajectory_columns",
    "__version__",
]
