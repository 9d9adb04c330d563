import math

import numpy as np
import pytest

from essrate.errors import DivergenceError, ParameterError, StallError
from essrate.integrator import (
    StepController, Stop, capped_step_width, integrate, reference_solve, rk_step,
    stability_violations,
)
from essrate.stability import EULER, RK4, TABLEAUX, max_stable_scale, stability_polynomial
from essrate.systems import Problem, VectorField, catalog_problem


def linear_problem(lam):
    field = VectorField(1, lambda y, t: lam * y, lambda y, t: np.array([[lam]]))
    return Problem("linear", field, lambda y, t: float(y[0] ** 2), 0.0, 1)


def test_euler_step_on_test_equation():
    f = VectorField(1, lambda y, t: -2.0 * y)
    assert rk_step(EULER, f, np.array([1.0]), 0.0, 0.1)[0] == pytest.approx(0.8)


def test_rk4_step_exact_value():
    f = VectorField(1, lambda y, t: y)
    expected = sum(0.1 ** k / math.factorial(k) for k in range(5))
    assert rk_step(RK4, f, np.array([1.0]), 0.0, 0.1)[0] == pytest.approx(expected, rel=1e-15)
    assert abs(expected - 1.1051708333) < 1e-10


@pytest.mark.parametrize("tab", list(TABLEAUX.values()), ids=lambda t: t.name)
def test_zero_field_leaves_state(tab):
    f = VectorField(3, lambda y, t: np.zeros(3))
    y = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(rk_step(tab, f, y, 0.0, 0.7), y)


def test_controller_validation():
    with pytest.raises(ParameterError):
        StepController.fixed(0.0)
    with pytest.raises(ParameterError):
        StepController.capped(theta=1.5)
    with pytest.raises(ParameterError):
        Stop()
    assert StepController.capped(1.0).theta == 1.0


def test_quartic_fixed_rk4_to_t4():
    p = catalog_problem("gradient_flow_quartic")
    tr = integrate(p, RK4, StepController.fixed(0.01), 0.0, [1.0], Stop(t_end=4.0))
    assert tr.t[-1] == 4.0 and tr.n_steps == 400
    assert abs(tr.y[-1, 0] - 1 / 3) < 1e-8
    assert tr.h[0] == 0 and tr.k[-1] == 400


def quartic_euler_oracle(n, theta=0.9):
    """Scalar recursion: Jacobian -3y^2 at the step start, Euler scale 2/|lambda|."""
    t, y = 0.0, 1.0
    ts, hs = [t], [0.0]
    for _ in range(n):
        h = theta * 2.0 / (3.0 * y * y)
        y = y - h * y ** 3
        t = t + h
        ts.append(t)
        hs.append(h)
    return np.array(ts), np.array(hs)


def test_quartic_capped_euler_follows_scalar_recursion():
    p = catalog_problem("gradient_flow_quartic")
    tr = integrate(p, EULER, StepController.capped(0.9), 0.0, [1.0], Stop(max_steps=15))
    ts, hs = quartic_euler_oracle(15)
    assert np.allclose(tr.t, ts, rtol=1e-8)
    assert np.allclose(tr.h, hs, rtol=1e-8)
    assert np.allclose(tr.y[:, 0], 0.4 ** np.arange(16), rtol=1e-8)
    # geometric time growth, exponential gap decay in k
    ratios = tr.t[2:] / tr.t[1:-1]
    assert np.all(ratios[3:] > 5.0)
    assert np.allclose(tr.gap[1:] / tr.gap[:-1], 0.4 ** 4, rtol=1e-6)


def test_quartic_60_steps_reaches_fallback():
    p = catalog_problem("gradient_flow_quartic")
    tr = integrate(p, EULER, StepController.capped(0.9, h_max_abs=10.0), 0.0, [1.0], Stop(max_steps=60))
    assert tr.n_steps == 60
    capped = np.array([max_stable_scale(stability_polynomial(EULER), -3 * y * y) for y in tr.y[:-1, 0]])
    finite = np.isfinite(capped)
    # the stability cap governs while |lambda| >= 1e-12, the fallback afterwards
    assert np.allclose(tr.h[1:][finite], 0.9 * capped[finite], rtol=1e-8)
    assert np.all(tr.h[1:][~finite] == 10.0)
    assert finite[:15].all() and not finite[-1]
    assert np.all(np.diff(tr.gap) <= 0)


def test_power_law_p2_constant_steps():
    p = catalog_problem("power_law", {"p": 2, "a": 1})
    tr = integrate(p, RK4, StepController.capped(0.9), 1.0, [1.0, 1.0], Stop(max_steps=1000))
    assert tr.h[-1] == pytest.approx(0.9 * math.sqrt(2), rel=2e-3)


def test_gap_nonincreasing_on_gradient_flow():
    p = catalog_problem("gradient_flow_quartic")
    for tab in (EULER, RK4):
        for ctl in (StepController.fixed(0.05), StepController.capped(0.9)):
            tr = integrate(p, tab, ctl, 0.0, [1.0], Stop(max_steps=200, t_end=50.0))
            assert np.all(np.diff(tr.gap) <= 1e-15)


def observed_order(problem, tab, hs, t_end, exact):
    errs = []
    for h in hs:
        tr = integrate(problem, tab, StepController.fixed(h), 0.0, [1.0], Stop(t_end=t_end))
        errs.append(abs(tr.y[-1, 0] - exact))
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


def test_euler_order_on_quartic():
    p = catalog_problem("gradient_flow_quartic")
    hs = np.array([0.1, 0.05, 0.025, 0.0125])
    assert abs(observed_order(p, EULER, hs, 1.0, 3 ** -0.5) - 1.0) <= 0.1


@pytest.mark.parametrize("tab,expected", [(RK4, 4.0), (EULER, 1.0)], ids=["rk4", "euler"])
def test_order_on_linear_decay(tab, expected):
    hs = np.array([0.1, 0.05, 0.025, 0.0125])
    assert abs(observed_order(linear_problem(-1.0), tab, hs, 1.0, math.exp(-1)) - expected) <= 0.1


def test_rk4_order_on_quartic_in_asymptotic_range():
    # for h >= 0.05 the leading error term of the quartic is masked by higher ones
    p = catalog_problem("gradient_flow_quartic")
    hs = np.array([0.1, 0.05, 0.025, 0.0125]) / 4
    assert abs(observed_order(p, RK4, hs, 1.0, 3 ** -0.5) - 4.0) <= 0.2


CAPPED_RUNS = [
    ("gradient_flow_quartic", {}, EULER, 0.0, [1.0], 15),
    ("gradient_flow_quartic", {}, RK4, 0.0, [1.0], 30),
    ("gradient_flow_quartic_proper", {}, RK4, 0.0, [1.0], 20),
    ("power_law", {"p": 2}, RK4, 1.0, [1.0, 1.0], 300),
    ("power_law", {"p": 3}, RK4, 1.0, [1.0, 1.0], 300),
    ("sbc", {"a": 4.0}, RK4, 1.0, [1.0, 0.0], 300),
]


@pytest.mark.parametrize("pid,params,tab,t0,y0,n", CAPPED_RUNS)
def test_stability_compliance(pid, params, tab, t0, y0, n):
    p = catalog_problem(pid, params)
    tr = integrate(p, tab, StepController.capped(0.9), t0, y0, Stop(max_steps=n))
    assert stability_violations(p, tab, tr) == []


def test_theta_one_sits_on_boundary():
    p = linear_problem(-1.0)
    tr = integrate(p, EULER, StepController.capped(1.0), 0.0, [1.0], Stop(max_steps=3))
    assert tr.h[1] == pytest.approx(2.0, abs=1e-10)
    assert stability_violations(p, EULER, tr) == []


def test_capped_step_width_rules():
    R = stability_polynomial(EULER)
    assert capped_step_width(R, [0.0, 0.0], 0.9, 7.0) == 7.0
    assert capped_step_width(R, [-1.0, -4.0, 0.0], 0.9, 7.0) == pytest.approx(0.45)


def test_stall_and_divergence_guards():
    with pytest.raises(StallError):
        integrate(linear_problem(1.0), EULER, StepController.capped(0.9), 0.0, [1.0], Stop(max_steps=5))
    with pytest.raises(DivergenceError):
        integrate(linear_problem(10.0), RK4, StepController.fixed(1.0), 0.0, [1.0], Stop(max_steps=100))


def test_singular_start_rejected():
    p = catalog_problem("power_law", {"p": 2})
    with pytest.raises(ParameterError):
        integrate(p, RK4, StepController.fixed(0.1), 0.0, [1.0, 1.0], Stop(max_steps=3))


def test_gap_stop():
    p = catalog_problem("gradient_flow_quartic")
    tr = integrate(p, RK4, StepController.fixed(0.1), 0.0, [1.0], Stop(gap_below=1e-3))
    assert tr.gap[-1] < 1e-3 <= tr.gap[-2]


def test_reference_solve_lands_on_targets():
    f = VectorField(1, lambda y, t: -y)
    out = reference_solve(f, 0.0, [1.0], [0.3337, 1.0, 1.0, 2.5])
    assert np.allclose(out[:, 0], np.exp(-np.array([0.3337, 1.0, 1.0, 2.5])), rtol=1e-12)
    with pytest.raises(ParameterError):
        reference_solve(f, 0.0, [1.0], [1.0, 0.5])


def test_metadata_records_controller():
    p = catalog_problem("gradient_flow_quartic")
    tr = integrate(p, RK4, StepController.capped(0.5), 0.0, [1.0], Stop(max_steps=3))
    assert tr.capped
    assert tr.meta["controller"] == "capped(theta=0.5,rule=theta*min_eig_scale,h_max_abs=10.0)"
    assert tr.rho[0] == pytest.approx(3.0)
