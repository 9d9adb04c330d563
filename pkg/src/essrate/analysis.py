"""Convergence-rate fits and step-count diagnostics for integrated trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModeError, ParameterError
from .integrator import Trajectory
from .rescaling import TimeRescaling

MIN_SAMPLES = 10


@dataclass(frozen=True)
class RateFit:
    """gap ~ exp(prefactor_log) * t**exponent (power) or * exp(exponent*t) (exponential)."""

    model: str
    exponent: float
    prefactor_log: float
    window: tuple[int, int]
    r_squared: float

    @property
    def n_points(self) -> int:
        return self.window[1] - self.window[0]


def _prepare(t, gap) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    gap = np.asarray(gap, dtype=float)
    if t.shape != gap.shape or t.ndim != 1:
        raise ParameterError("t and gap must be 1-d arrays of equal length")
    if t.size < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} samples, got {t.size}")
    order = np.argsort(t, kind="stable")
    return t[order], gap[order]


def _window(coord: np.ndarray, fraction: float) -> tuple[int, int]:
    # trailing fraction of the covered coordinate range
    if not 0 < fraction <= 1:
        raise ParameterError(f"window_fraction must lie in (0, 1], got {fraction}")
    cut = coord[-1] - fraction * (coord[-1] - coord[0])
    lo = int(np.searchsorted(coord, cut, side="left"))
    lo = min(lo, coord.size - 2)
    return lo, coord.size


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ParameterError("fit window has no spread in the abscissa")
    slope = float(dx @ dy) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_tot = float(dy @ dy)
    ss_res = float(resid @ resid)
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, float(intercept), r2


def _log_gap(gap: np.ndarray, lo: int, hi: int) -> np.ndarray:
    g = gap[lo:hi]
    if np.any(~(g > 0)):
        raise DomainError("nonpositive gap in the fit window; filter or take an envelope first")
    return np.log(g)


def fit_power_rate(t, gap, window_fraction: float = 0.5) -> RateFit:
    """Least-squares line of log(gap) against log(t) on the trailing log-time window."""
    t, gap = _prepare(t, gap)
    if np.any(t <= 0):
        raise DomainError("power fits need t > 0")
    lt = np.log(t)
    lo, hi = _window(lt, window_fraction)
    slope, intercept, r2 = _line_fit(lt[lo:hi], _log_gap(gap, lo, hi))
    return RateFit("power", slope, intercept, (lo, hi), r2)


def fit_exponential_rate(t, gap, window_fraction: float = 0.5) -> RateFit:
    """Least-squares line of log(gap) against t on the trailing window of t."""
    t, gap = _prepare(t, gap)
    lo, hi = _window(t, window_fraction)
    slope, intercept, r2 = _line_fit(t[lo:hi], _log_gap(gap, lo, hi))
    return RateFit("exponential", slope, intercept, (lo, hi), r2)


def select_rate_model(t, gap, window_fraction: float = 0.5) -> RateFit:
    """Fit both families on the power-law window and keep the better r^2 (ties go to power)."""
    t, gap = _prepare(t, gap)
    if np.any(t <= 0):
        raise DomainError("rate model selection needs t > 0")
    lt = np.log(t)
    lo, hi = _window(lt, window_fraction)
    lg = _log_gap(gap, lo, hi)
    ps, pi, pr2 = _line_fit(lt[lo:hi], lg)
    es, ei, er2 = _line_fit(t[lo:hi], lg)
    if er2 > pr2 + 1e-6:
        return RateFit("exponential", es, ei, (lo, hi), er2)
    return RateFit("power", ps, pi, (lo, hi), pr2)


def running_min_envelope(gap) -> np.ndarray:
    gap = np.asarray(gap, dtype=float)
    if gap.size == 0:
        raise ParameterError("empty sample")
    return np.minimum.accumulate(gap)


def upper_envelope(gap) -> np.ndarray:
    """Smallest nonincreasing sequence lying on or above ``gap`` (suffix maximum).

    Oscillating gaps touch zero once per half period, so their running
    minimum follows the sampled near-zeros; the upper envelope follows the
    peaks, which is what an O(beta) bound constrains.
    """
    gap = np.asarray(gap, dtype=float)
    if gap.size == 0:
        raise ParameterError("empty sample")
    return np.maximum.accumulate(gap[::-1])[::-1]


ENVELOPES = {
    "none": lambda g: np.asarray(g, dtype=float),
    "min": running_min_envelope,
    "upper": upper_envelope,
}


@dataclass(frozen=True)
class Theorem4Report:
    k0: int
    alpha_gap: np.ndarray
    ratio_sup: float
    tail_slope: float

    @property
    def ratios(self) -> np.ndarray:
        k = np.arange(1, self.alpha_gap.size)
        return self.alpha_gap[1:] / k


def theorem4_diagnostic(traj: Trajectory, r: TimeRescaling, k0: int = 0) -> Theorem4Report:
    """Elapsed time alpha(t_{k0+k}) - alpha(t_{k0}) on the clock of ``r`` after k steps.

    ``ratio_sup`` bounds the growth per step; ``tail_slope`` is the log-log
    slope against k over the second half of the steps and only describes
    sharpness.
    """
    n = traj.t.size
    if not 0 <= k0 < n - 1:
        raise ParameterError(f"k0 must lie in [0, {n - 2}], got {k0}")
    base = r.alpha(float(traj.t[k0]))
    alpha_gap = np.array([r.alpha(float(t)) - base for t in traj.t[k0:]])
    alpha_gap[0] = 0.0
    k = np.arange(alpha_gap.size, dtype=float)
    ratio_sup = float(np.max(alpha_gap[1:] / k[1:]))
    K = alpha_gap.size - 1
    tail = np.arange(max(1, K // 2), K + 1)
    if tail.size >= 2 and np.all(alpha_gap[tail] > 0):
        tail_slope, _, _ = _line_fit(np.log(k[tail]), np.log(alpha_gap[tail]))
    else:
        tail_slope = math.nan
    return Theorem4Report(k0, alpha_gap, ratio_sup, float(tail_slope))


def step_law_fit(traj: Trajectory, window_fraction: float = 0.5) -> float:
    """Log-log slope of the step width h_k against its start time t_{k-1}."""
    if not traj.capped:
        raise ModeError("step-law fits need a stability-capped trajectory")
    if traj.n_steps < MIN_SAMPLES:
        raise ParameterError(f"need at least {MIN_SAMPLES} steps")
    t_start = traj.t[:-1]
    h = traj.h[1:]
    keep = t_start > 0
    lt = np.log(t_start[keep])
    lh = np.log(h[keep])
    lo, hi = _window(lt, window_fraction)
    slope, _, _ = _line_fit(lt[lo:hi], lh[lo:hi])
    return slope


@dataclass(frozen=True)
class Proposition1Verdict:
    passed: bool
    reason: str
    difference: float


def proposition1_check(fit1: RateFit, fit2: RateFit, tol: float, clock_factor: float | None = None) -> Proposition1Verdict:
    """Do two proper-representative rates agree up to a linear change of clock?

    Power exponents must match within ``tol``.  Exponential slopes scale with
    the clock, so fit2's slope divided by fit1's must equal ``clock_factor``
    (the C in beta2(t) = beta1(C t)) within ``tol``.
    """
    if fit1.model != fit2.model:
        return Proposition1Verdict(False, f"model mismatch: {fit1.model} vs {fit2.model}", math.inf)
    if fit1.model == "power":
        diff = abs(fit1.exponent - fit2.exponent)
        return Proposition1Verdict(diff <= tol, f"power exponents differ by {diff:.3g}", diff)
    c = 1.0 if clock_factor is None else clock_factor
    if fit1.exponent == 0.0:
        same = fit2.exponent == 0.0
        return Proposition1Verdict(same, "zero reference slope", 0.0 if same else math.inf)
    diff = abs(fit2.exponent / fit1.exponent - c)
    return Proposition1Verdict(diff <= tol, f"slope ratio deviates from C={c!r} by {diff:.3g}", diff)
