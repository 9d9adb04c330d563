"""Explicit Runge-Kutta stepping with fixed or stability-capped step widths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import spectral
from .errors import DivergenceError, ParameterError, ShapeError, StallError
from .stability import RK4, ButcherTableau, max_stable_scale, stability_polynomial
from .systems import Problem, VectorField, eval_jacobian, eval_objective_gap

DIVERGENCE_LIMIT = 1e12
STALL_LIMIT = 1e-14
SAFETY_MAX_STEPS = 10_000_000


@dataclass(frozen=True)
class StepController:
    """Either fixed steps of width ``h`` or steps capped by the stability domain.

    In capped mode the width is ``theta`` times the smallest admissible scale
    over the Jacobian eigenvalues at the step start.  ``h_max_abs`` is used
    only when every eigenvalue is zero.
    """

    mode: str
    h: float | None = None
    theta: float = 0.9
    h_max_abs: float = 10.0

    def __post_init__(self):
        if self.mode == "fixed":
            if self.h is None or not self.h > 0:
                raise ParameterError(f"fixed controller needs h > 0, got {self.h}")
        elif self.mode == "capped":
            if not 0 < self.theta <= 1:
                raise ParameterError(f"theta must lie in (0, 1], got {self.theta}")
            if not self.h_max_abs > 0:
                raise ParameterError("h_max_abs must be > 0")
        else:
            raise ParameterError(f"unknown controller mode {self.mode!r}")

    @classmethod
    def fixed(cls, h: float) -> "StepController":
        return cls("fixed", h=h)

    @classmethod
    def capped(cls, theta: float = 0.9, h_max_abs: float = 10.0) -> "StepController":
        return cls("capped", theta=theta, h_max_abs=h_max_abs)

    def describe(self) -> str:
        if self.mode == "fixed":
            return f"fixed(h={self.h!r})"
        return f"capped(theta={self.theta!r},rule=theta*min_eig_scale,h_max_abs={self.h_max_abs!r})"


@dataclass(frozen=True)
class Stop:
    max_steps: int | None = None
    t_end: float | None = None
    gap_below: float | None = None

    def __post_init__(self):
        if self.max_steps is None and self.t_end is None and self.gap_below is None:
            raise ParameterError("at least one stop criterion is required")


@dataclass
class Trajectory:
    """Per-step record of one integration run.

    Row ``k`` holds the state after step ``k``; ``h[k]`` is the width of that
    step and ``rho[k]`` the Jacobian spectral radius at its start
    ``(y[k-1], t[k-1])``.  Row 0 is the initial point with ``h = 0`` and the
    spectral radius at ``(y0, t0)``.
    """

    t: np.ndarray
    h: np.ndarray
    y: np.ndarray
    gap: np.ndarray
    rho: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.t.size)

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def capped(self) -> bool:
        return self.meta.get("mode") == "capped"


def rk_step(tableau: ButcherTableau, field_: VectorField, y: np.ndarray, t: float, h: float) -> np.ndarray:
    s = tableau.stages
    A, B, C = tableau.A, tableau.B, tableau.C
    ks = np.empty((s, y.size))
    for i in range(s):
        yi = y + h * (A[i, :i] @ ks[:i]) if i else y
        ks[i] = field_.func(yi, t + C[i] * h)
        if not np.all(np.isfinite(ks[i])):
            raise DivergenceError(f"non-finite stage value at t={t!r}, h={h!r}")
    return y + h * (B @ ks)


def capped_step_width(R, eigs: Iterable[complex], theta: float, h_max_abs: float) -> float:
    best = math.inf
    seen = set()
    for lam in eigs:
        # R has real coefficients, so conjugates share the same scale
        key = (round(lam.real, 15), round(abs(lam.imag), 15))
        if key in seen:
            continue
        seen.add(key)
        best = min(best, max_stable_scale(R, lam))
    if math.isinf(best):
        return h_max_abs
    return theta * best


def integrate(
    problem: Problem,
    tableau: ButcherTableau,
    controller: StepController,
    t0: float,
    y0: Sequence[float],
    stop: Stop,
    divergence_limit: float = DIVERGENCE_LIMIT,
    stall_limit: float = STALL_LIMIT,
) -> Trajectory:
    """Integrate ``problem`` from ``(t0, y0)`` until ``stop`` triggers.

    Raises
    ------
    DivergenceError
        When ``max|y|`` exceeds ``divergence_limit`` or a stage is non-finite.
    StallError
        When a capped step width falls below ``stall_limit``.
    """
    y = np.array(y0, dtype=float)
    if y.shape != (problem.dim,):
        raise ShapeError(f"y0 has shape {y.shape}, expected ({problem.dim},)")
    if problem.field.time_singularity_at_zero and t0 < problem.recommended_t0:
        raise ParameterError(
            f"{problem.name} is singular at t=0; start at t0 >= {problem.recommended_t0}"
        )
    capped = controller.mode == "capped"
    R = stability_polynomial(tableau) if capped else None
    max_steps = stop.max_steps if stop.max_steps is not None else SAFETY_MAX_STEPS

    t = float(t0)
    ts, hs, ys, gaps, rhos = [t], [0.0], [y.copy()], [eval_objective_gap(problem, y, t)], []
    eigs = spectral.eigenvalues(eval_jacobian(problem, y, t))
    rhos.append(max(abs(lam) for lam in eigs))

    k = 0
    while k < max_steps:
        if stop.t_end is not None and t >= stop.t_end:
            break
        if stop.gap_below is not None and gaps[-1] < stop.gap_below:
            break
        rho = max(abs(lam) for lam in eigs)
        if capped:
            h = capped_step_width(R, eigs, controller.theta, controller.h_max_abs)
            if h < stall_limit:
                raise StallError(f"step width {h!r} below {stall_limit!r} at t={t!r}")
        else:
            h = controller.h
        landed = False
        if stop.t_end is not None:
            remaining = stop.t_end - t
            if h >= remaining * (1.0 - 1e-10):
                h, landed = remaining, True
        y = rk_step(tableau, problem.field, y, t, h)
        t = stop.t_end if landed else t + h
        if not np.max(np.abs(y)) <= divergence_limit:
            raise DivergenceError(f"|y| exceeded {divergence_limit!r} at t={t!r}")
        k += 1
        ts.append(t)
        hs.append(h)
        ys.append(y.copy())
        gaps.append(eval_objective_gap(problem, y, t))
        rhos.append(rho)
        eigs = spectral.eigenvalues(eval_jacobian(problem, y, t))

    return Trajectory(
        np.array(ts),
        np.array(hs),
        np.array(ys),
        np.array(gaps),
        np.array(rhos),
        {
            "problem": problem.name,
            "tableau": tableau.name,
            "controller": controller.describe(),
            "mode": controller.mode,
            "t0": float(t0),
            "y0": [float(v) for v in np.asarray(y0, dtype=float)],
        },
    )


def reference_solve(
    field_: VectorField,
    t0: float,
    y0: Sequence[float],
    targets: Sequence[float],
    h: float = 1e-3,
    tableau: ButcherTableau = RK4,
    divergence_limit: float = DIVERGENCE_LIMIT,
) -> np.ndarray:
    """States at increasing ``targets`` using fixed steps clamped onto each target."""
    y = np.array(y0, dtype=float)
    t = float(t0)
    out = np.empty((len(targets), y.size))
    for j, target in enumerate(targets):
        if target < t - 1e-15 * max(1.0, abs(t)):
            raise ParameterError("targets must be nondecreasing and not before t0")
        while t < target:
            step = min(h, target - t)
            if target - (t + step) <= 1e-12 * h:
                y = rk_step(tableau, field_, y, t, target - t)
                t = target
            else:
                y = rk_step(tableau, field_, y, t, step)
                t += step
            if not np.max(np.abs(y)) <= divergence_limit:
                raise DivergenceError(f"|y| exceeded {divergence_limit!r} at t={t!r}")
        out[j] = y
    return out


def stability_violations(
    problem: Problem, tableau: ButcherTableau, traj: Trajectory, slack: float = 1e-9
) -> list[tuple[int, complex, float]]:
    """Steps whose width puts an eigenvalue outside the stability domain.

    Each entry is ``(k, lambda, |R(h_k lambda)|)`` with lambda taken from the
    Jacobian at the start of step k.
    """
    R = stability_polynomial(tableau)
    bad = []
    for k in range(1, traj.t.size):
        jac = eval_jacobian(problem, traj.y[k - 1], traj.t[k - 1])
        for lam in spectral.eigenvalues(jac):
            amp = abs(R(traj.h[k] * lam))
            if amp > 1.0 + slack:
                bad.append((k, lam, amp))
    return bad
