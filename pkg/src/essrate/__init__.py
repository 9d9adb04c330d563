"""Stability-constrained discretization of optimization ODEs.

Integrates optimization ODEs with explicit Runge-Kutta methods whose step
widths respect the linear stability domain, rescales their time, and
measures the discrete convergence rates that result.
"""

from .analysis import (
    RateFit,
    Theorem4Report,
    fit_exponential_rate,
    fit_power_rate,
    proposition1_check,
    running_min_envelope,
    select_rate_model,
    step_law_fit,
    theorem4_diagnostic,
    upper_envelope,
)
from .integrator import StepController, Stop, Trajectory, integrate, reference_solve, rk_step
from .rescaling import (
    ProperVerdict,
    TimeRescaling,
    check_equivalence,
    compose,
    proper_verdict,
    standard_rescaling,
    transform,
)
from .spectral import eigenvalues, spectral_radius
from .stability import (
    EULER,
    HEUN,
    KUTTA3,
    RK4,
    ButcherTableau,
    StabilityPolynomial,
    domain_boundary,
    in_domain,
    max_stable_scale,
    stability_polynomial,
)
from .systems import Problem, VectorField, catalog_problem, eval_jacobian, eval_objective_gap

__version__ = "0.1.0"
