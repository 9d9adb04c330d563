"""ODE systems arising from continuous-time optimization.

States of second-order systems are flattened with the optimization variable
first and auxiliary variables after, so an objective always reads the prefix
``y[:x_dim]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .errors import CatalogError, ParameterError, ShapeError, SingularityError

Field = Callable[[np.ndarray, float], np.ndarray]
Jacobian = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class VectorField:
    """Right-hand side g(y, t) of a first-order non-autonomous system."""

    dim: int
    func: Field
    analytic_jacobian: Jacobian | None = None
    time_singularity_at_zero: bool = False
    # the Jacobian does not depend on y (linear fields)
    state_independent_jacobian: bool = False

    def eval(self, y, t: float) -> np.ndarray:
        out = np.asarray(self.func(np.asarray(y, dtype=float), t), dtype=float)
        if out.shape != (self.dim,):
            raise ShapeError(f"field returned shape {out.shape}, expected ({self.dim},)")
        return out


@dataclass(frozen=True)
class Problem:
    name: str
    field: VectorField
    objective: Callable[[np.ndarray, float], float]
    optimal_value: float
    x_dim: int
    recommended_t0: float = 0.0
    # exact_solution(t, y0) with y0 given at t = 0
    exact_solution: Callable[[float, np.ndarray], np.ndarray] | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.field.dim


def _check_state(problem: Problem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.dim,):
        raise ShapeError(f"{problem.name}: state has shape {y.shape}, expected ({problem.dim},)")
    return y


def eval_objective_gap(problem: Problem, y, t: float) -> float:
    y = _check_state(problem, y)
    return float(problem.objective(y, t)) - problem.optimal_value


def fd_jacobian(field_: VectorField, y, t: float) -> np.ndarray:
    """Central-difference Jacobian with increments sqrt(eps)*max(1, |y_i|)."""
    y = np.asarray(y, dtype=float)
    n = y.size
    jac = np.empty((n, n))
    root_eps = math.sqrt(np.finfo(float).eps)
    for i in range(n):
        eps_i = root_eps * max(1.0, abs(y[i]))
        yp = y.copy()
        ym = y.copy()
        yp[i] += eps_i
        ym[i] -= eps_i
        jac[:, i] = (field_.eval(yp, t) - field_.eval(ym, t)) / (2.0 * eps_i)
    return jac


def eval_jacobian(problem: Problem, y, t: float) -> np.ndarray:
    y = _check_state(problem, y)
    if problem.field.time_singularity_at_zero and t <= 0.0:
        raise SingularityError(f"{problem.name}: Jacobian requested at singular time t={t}")
    if problem.field.analytic_jacobian is not None:
        return np.asarray(problem.field.analytic_jacobian(y, t), dtype=float)
    return fd_jacobian(problem.field, y, t)


# -- objective plumbing -------------------------------------------------------


@dataclass(frozen=True)
class _Objective:
    """An objective f on R^d with gradient and optional Hessian."""

    d: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray] | None
    f_star: float
    linear_gradient: bool


def _objective_from_params(params: Mapping[str, Any], default_curvature: float = 1.0) -> _Objective:
    d = int(params.get("dim", 1))
    if d < 1:
        raise ParameterError("dim must be a positive integer")
    if "gradient" in params:
        if "objective" not in params:
            raise ParameterError("a custom gradient requires a matching 'objective' callable")
        return _Objective(
            d,
            params["objective"],
            params["gradient"],
            params.get("hessian"),
            float(params.get("optimal_value", 0.0)),
            bool(params.get("linear_gradient", False)),
        )
    a = float(params.get("a", default_curvature))
    if not a > 0:
        raise ParameterError(f"curvature a must be > 0, got {a}")
    eye = a * np.eye(d)
    return _Objective(
        d,
        lambda x: 0.5 * a * float(x @ x),
        lambda x: a * x,
        lambda x: eye,
        0.0,
        True,
    )


def _prefix_objective(obj: _Objective):
    d = obj.d
    return lambda y, t: obj.f(y[:d])


def _require_positive(params: Mapping[str, Any], key: str, default=None) -> float:
    if key not in params and default is None:
        raise ParameterError(f"missing required parameter {key!r}")
    value = float(params.get(key, default))
    if not value > 0:
        raise ParameterError(f"parameter {key} must be > 0, got {value}")
    return value


# -- catalog ------------------------------------------------------------------


def _gradient_flow_quartic(params):
    d = int(params.get("dim", 1))

    def func(y, t):
        return -y ** 3

    def jac(y, t):
        return np.diag(-3.0 * y ** 2)

    def exact(t, y0):
        y0 = np.asarray(y0, dtype=float)
        return y0 / np.sqrt(1.0 + 2.0 * y0 ** 2 * t)

    return Problem(
        "gradient_flow_quartic",
        VectorField(d, func, jac),
        lambda y, t: 0.25 * float(np.sum(y ** 4)),
        0.0,
        d,
        0.0,
        exact,
        dict(params),
    )


def _gradient_flow_quartic_proper(params):
    d = int(params.get("dim", 1))

    def func(y, t):
        return -math.exp(t) * y ** 3

    def jac(y, t):
        return np.diag(-3.0 * math.exp(t) * y ** 2)

    def exact(t, y0):
        y0 = np.asarray(y0, dtype=float)
        return y0 / np.sqrt(1.0 + 2.0 * y0 ** 2 * math.expm1(t))

    return Problem(
        "gradient_flow_quartic_proper",
        VectorField(d, func, jac),
        lambda y, t: 0.25 * float(np.sum(y ** 4)),
        0.0,
        d,
        0.0,
        exact,
        dict(params),
    )


def _block_jacobian(d, top_left, top_right, bottom_left, bottom_right):
    jac = np.empty((2 * d, 2 * d))
    jac[:d, :d] = top_left
    jac[:d, d:] = top_right
    jac[d:, :d] = bottom_left
    jac[d:, d:] = bottom_right
    return jac


def _sbc(params):
    obj = _objective_from_params(params)
    d = obj.d
    eye = np.eye(d)
    zero = np.zeros((d, d))

    def func(y, t):
        x, v = y[:d], y[d:]
        return np.concatenate([v, -(3.0 / t) * v - obj.grad(x)])

    jac = None
    if obj.hess is not None:
        def jac(y, t):
            return _block_jacobian(d, zero, eye, -obj.hess(y[:d]), -(3.0 / t) * eye)

    return Problem(
        "sbc",
        VectorField(2 * d, func, jac, True, obj.linear_gradient),
        _prefix_objective(obj),
        obj.f_star,
        d,
        1.0,
        None,
        dict(params),
    )


def _unit_wibisono(params):
    obj = _objective_from_params(params)
    d = obj.d
    eye = np.eye(d)
    zero = np.zeros((d, d))

    def func(y, t):
        x, z = y[:d], y[d:]
        return np.concatenate([(z - x) / t, -obj.grad(x)])

    jac = None
    if obj.hess is not None:
        def jac(y, t):
            return _block_jacobian(d, -eye / t, eye / t, -obj.hess(y[:d]), zero)

    return Problem(
        "unit_wibisono",
        VectorField(2 * d, func, jac, True, obj.linear_gradient),
        _prefix_objective(obj),
        obj.f_star,
        d,
        1.0,
        None,
        dict(params),
    )


def _power_law(params):
    p = _require_positive(params, "p")
    obj = _objective_from_params(params)
    d = obj.d
    eye = np.eye(d)
    zero = np.zeros((d, d))

    def func(y, t):
        x, z = y[:d], y[d:]
        return np.concatenate([(p / t) * (z - x), -p * t ** (p - 1.0) * obj.grad(x)])

    jac = None
    if obj.hess is not None:
        def jac(y, t):
            return _block_jacobian(
                d, -(p / t) * eye, (p / t) * eye, -p * t ** (p - 1.0) * obj.hess(y[:d]), zero
            )

    return Problem(
        "power_law",
        VectorField(2 * d, func, jac, True, obj.linear_gradient),
        _prefix_objective(obj),
        obj.f_star,
        d,
        1.0,
        None,
        dict(params),
    )


def _singular_at_zero(*fns) -> bool:
    with np.errstate(all="ignore"):
        for fn in fns:
            try:
                v = float(fn(0.0))
            except (ZeroDivisionError, ValueError, OverflowError):
                return True
            if not math.isfinite(v):
                return True
    return False


def _wibisono(params):
    try:
        eta, eta_dot = params["eta"], params["eta_dot"]
    except KeyError:
        raise ParameterError("wibisono needs callables 'eta' and 'eta_dot'") from None
    if not (callable(eta) and callable(eta_dot)):
        raise ParameterError("'eta' and 'eta_dot' must be callables")
    obj = _objective_from_params(params)
    d = obj.d
    eye = np.eye(d)
    zero = np.zeros((d, d))
    singular = bool(params.get("singular", _singular_at_zero(eta_dot)))

    # gamma = d/dt exp(eta) = eta_dot * exp(eta)
    def func(y, t):
        x, z = y[:d], y[d:]
        rate = eta_dot(t)
        return np.concatenate([rate * (z - x), -rate * math.exp(eta(t)) * obj.grad(x)])

    jac = None
    if obj.hess is not None:
        def jac(y, t):
            rate = eta_dot(t)
            return _block_jacobian(
                d, -rate * eye, rate * eye, -rate * math.exp(eta(t)) * obj.hess(y[:d]), zero
            )

    return Problem(
        "wibisono",
        VectorField(2 * d, func, jac, singular, obj.linear_gradient),
        _prefix_objective(obj),
        obj.f_star,
        d,
        1.0 if singular else 0.0,
        None,
        dict(params),
    )


CATALOG = {
    "gradient_flow_quartic": _gradient_flow_quartic,
    "gradient_flow_quartic_proper": _gradient_flow_quartic_proper,
    "sbc": _sbc,
    "unit_wibisono": _unit_wibisono,
    "power_law": _power_law,
    "wibisono": _wibisono,
}


def catalog_problem(id: str, params: Mapping[str, Any] | None = None) -> Problem:
    """Build one of the catalog systems.

    ``power_law`` needs ``p > 0`` and accepts curvature ``a > 0`` (default 1);
    ``sbc``, ``unit_wibisono``, ``power_law`` and ``wibisono`` take either
    ``a`` for f(x) = a|x|^2/2 or callables ``objective``/``gradient``
    (optionally ``hessian``, ``optimal_value``).  ``wibisono`` requires the
    clock data ``eta`` and ``eta_dot``.
    """
    params = dict(params or {})
    try:
        build = CATALOG[id]
    except KeyError:
        raise CatalogError(f"unknown problem {id!r}; known: {sorted(CATALOG)}") from None
    return build(params)


def eta_power(p: float):
    """Clock data (eta, eta_dot) for exp(eta(t)) = t**p."""
    if not p > 0:
        raise ParameterError(f"p must be > 0, got {p}")
    return (lambda t: p * math.log(t)), (lambda t: p / t)


def eta_linear(c: float):
    """Clock data for exp(eta(t)) = exp(c*t)."""
    if not c > 0:
        raise ParameterError(f"c must be > 0, got {c}")
    return (lambda t: c * t), (lambda t: c)
