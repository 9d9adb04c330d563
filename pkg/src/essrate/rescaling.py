"""Time rescaling t = alpha(tau) of ODE systems and proper-representative tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvariantError, ParameterError, ShapeError
from .integrator import StepController, Stop, integrate, reference_solve
from .spectral import spectral_radius
from .stability import RK4
from .systems import Problem, VectorField, eval_jacobian


@dataclass(frozen=True)
class TimeRescaling:
    """A clock map alpha with its derivative."""

    alpha: Callable[[float], float]
    alpha_dot: Callable[[float], float]
    label: str

    def validate(
        self,
        t_big: float = 1e8,
        reach: float = 1e6,
        grid: Sequence[float] | None = None,
        rtol: float = 1e-5,
    ) -> None:
        """Check alpha(0) = 0, positivity of alpha_dot, growth, and alpha_dot = d alpha/dt.

        Raises InvariantError on the first violation.  ``reach`` is the value
        alpha(t_big) must exceed; logarithmic clocks need a smaller one.
        """
        if abs(self.alpha(0.0)) > 1e-12:
            raise InvariantError(f"{self.label}: alpha(0) = {self.alpha(0.0)!r}")
        if not self.alpha(t_big) > reach:
            raise InvariantError(f"{self.label}: alpha({t_big!r}) does not exceed {reach!r}")
        grid = np.geomspace(1e-3, 10.0, 25) if grid is None else np.asarray(grid, dtype=float)
        for t in grid:
            d = self.alpha_dot(t)
            if not d > 0:
                raise InvariantError(f"{self.label}: alpha_dot({t!r}) = {d!r} is not positive")
            eps = 1e-6 * max(t, 1e-3)
            fd = (self.alpha(t + eps) - self.alpha(t - eps)) / (2 * eps)
            if abs(fd - d) > rtol * abs(d):
                raise InvariantError(f"{self.label}: alpha_dot disagrees with alpha at t={t!r}")

    def inverse(self, s: float, tol: float = 1e-14) -> float:
        """Numerical alpha^{-1}(s) for s >= 0 by bracketing and bisection."""
        if s <= 0.0:
            return 0.0
        lo, hi = 0.0, 1.0
        while self.alpha(hi) < s:
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise ParameterError(f"{self.label}: cannot invert at {s!r}")
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if self.alpha(mid) < s:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * hi:
                break
        return hi


def _power(p):
    return TimeRescaling(lambda t: t ** p, lambda t: p * t ** (p - 1.0), f"power(p={p!r})")


def standard_rescaling(kind: str, **params) -> TimeRescaling:
    """Build one of ``power`` (t**p), ``exp_shifted`` (e**t - 1),
    ``log_shifted`` (log(1 + t)) or ``linear`` (C*t)."""
    if kind == "power":
        p = float(params.get("p", 0.0))
        if not p > 0:
            raise ParameterError(f"power rescaling needs p > 0, got {p}")
        return _power(p)
    if kind == "linear":
        c = float(params.get("C", 0.0))
        if not c > 0:
            raise ParameterError(f"linear rescaling needs C > 0, got {c}")
        return TimeRescaling(lambda t: c * t, lambda t: c, f"linear(C={c!r})")
    if kind == "exp_shifted":
        return TimeRescaling(math.expm1, math.exp, "exp_shifted")
    if kind == "log_shifted":
        return TimeRescaling(math.log1p, lambda t: 1.0 / (1.0 + t), "log_shifted")
    raise ParameterError(f"unknown rescaling kind {kind!r}")


def compose(outer: TimeRescaling, inner: TimeRescaling) -> TimeRescaling:
    """The clock t -> outer(inner(t))."""
    return TimeRescaling(
        lambda t: outer.alpha(inner.alpha(t)),
        lambda t: outer.alpha_dot(inner.alpha(t)) * inner.alpha_dot(t),
        f"{outer.label}o{inner.label}",
    )


def _singular_rate(r: TimeRescaling) -> bool:
    with np.errstate(all="ignore"):
        try:
            return not math.isfinite(float(r.alpha_dot(0.0)))
        except (ZeroDivisionError, ValueError, OverflowError):
            return True


def transform(problem: Problem, r: TimeRescaling) -> Problem:
    """The rescaled system alpha_dot(t) * g(y, alpha(t)) sharing the trajectory of ``problem``."""
    g = problem.field

    def func(y, t):
        return r.alpha_dot(t) * g.func(y, r.alpha(t))

    jac = None
    if g.analytic_jacobian is not None:
        def jac(y, t):
            return r.alpha_dot(t) * g.analytic_jacobian(y, r.alpha(t))

    exact = None
    if problem.exact_solution is not None:
        def exact(t, y0):
            return problem.exact_solution(r.alpha(t), y0)

    t0 = problem.recommended_t0
    return Problem(
        f"{problem.name}@{r.label}",
        VectorField(
            g.dim,
            func,
            jac,
            g.time_singularity_at_zero or _singular_rate(r),
            g.state_independent_jacobian,
        ),
        problem.objective,
        problem.optimal_value,
        problem.x_dim,
        r.inverse(t0) if t0 > 0 else 0.0,
        exact,
        dict(problem.params, rescaling=r.label),
    )


@dataclass(frozen=True)
class EquivalenceReport:
    max_deviation: float
    passed: bool
    deviations: tuple[float, ...]
    checkpoints: tuple[float, ...]


def check_equivalence(
    p1: Problem,
    p2: Problem,
    r: TimeRescaling,
    y0: Sequence[float],
    checkpoints: Sequence[float],
    tol: float,
    t0: float | None = None,
    h_ref: float = 1e-3,
) -> EquivalenceReport:
    """Compare y2(t_j) with y1(alpha(t_j)) at each checkpoint.

    ``p2`` starts at ``t0`` and ``p1`` at ``alpha(t0)``, both from ``y0``;
    ``t0`` defaults to the later of the two recommended start times.  Both
    runs use fixed RK4 steps of ``h_ref`` that land exactly on the targets.
    """
    if p1.dim != p2.dim:
        raise ShapeError(f"dimension mismatch: {p1.dim} vs {p2.dim}")
    if t0 is None:
        t0 = max(p2.recommended_t0, r.inverse(p1.recommended_t0) if p1.recommended_t0 > 0 else 0.0)
    cps = sorted(float(c) for c in checkpoints)
    y2 = reference_solve(p2.field, t0, y0, cps, h=h_ref)
    y1 = reference_solve(p1.field, r.alpha(t0), y0, [r.alpha(c) for c in cps], h=h_ref)
    dev = np.max(np.abs(y2 - y1), axis=1) if cps else np.zeros(0)
    worst = float(np.max(dev)) if dev.size else 0.0
    return EquivalenceReport(worst, worst <= tol, tuple(float(d) for d in dev), tuple(cps))


@dataclass(frozen=True)
class ProperVerdict:
    is_proper: bool
    rho_min: float
    rho_max: float
    ratio: float
    samples: tuple[tuple[float, float], ...] = field(default=())
    kappa: float = 10.0
    source: str = "exact"


def proper_verdict(
    problem: Problem,
    t_lo: float,
    t_hi: float,
    n_samples: int = 50,
    kappa: float = 10.0,
    y_source: str = "exact",
    y0: Sequence[float] | None = None,
    t_start: float | None = None,
    theta: float = 0.5,
) -> ProperVerdict:
    """Sample the Jacobian spectral radius along one solution on a geometric time grid.

    The solution starts from ``y0`` (default all ones) at t = 0 for the exact
    source, or at ``t_start`` (default the problem's recommended start) for the
    integrated source.  Integration uses stability-capped RK4 with safety
    factor ``theta`` landing on each sample time.  Systems whose Jacobian
    does not depend on the state are sampled without integrating.
    """
    if not t_hi > t_lo > 0:
        raise ParameterError("need 0 < t_lo < t_hi")
    if not kappa > 1:
        raise ParameterError("kappa must exceed 1")
    if n_samples < 2:
        raise ParameterError("need at least two samples")
    y0 = np.ones(problem.dim) if y0 is None else np.asarray(y0, dtype=float)
    times = np.geomspace(t_lo, t_hi, n_samples)

    if y_source == "exact":
        if problem.exact_solution is None:
            raise ParameterError(f"{problem.name} has no exact solution")
        states = [problem.exact_solution(t, y0) for t in times]
    elif y_source == "trajectory":
        if problem.field.state_independent_jacobian:
            states = [y0] * n_samples
        else:
            start = problem.recommended_t0 if t_start is None else t_start
            if start > t_lo:
                raise ParameterError("trajectory start lies after t_lo")
            states = []
            t, y = start, y0
            for target in times:
                if target > t:
                    tr = integrate(problem, RK4, StepController.capped(theta), t, y, Stop(t_end=target))
                    t, y = tr.t[-1], tr.y[-1]
                states.append(y)
    else:
        raise ParameterError(f"unknown y_source {y_source!r}")

    rhos = [spectral_radius(eval_jacobian(problem, y, t)) for t, y in zip(times, states)]
    rho_min, rho_max = min(rhos), max(rhos)
    ratio = rho_max / rho_min if rho_min > 0 else math.inf
    return ProperVerdict(
        rho_min > 0 and ratio <= kappa,
        rho_min,
        rho_max,
        ratio,
        tuple((float(t), float(r)) for t, r in zip(times, rhos)),
        kappa,
        y_source,
    )
