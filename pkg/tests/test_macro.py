import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from edid import macro
from edid.macro import MacroParams


def test_rates_at_half():
    assert macro.logistic_rate(0.5, 1.0) == pytest.approx(0.25)
    assert macro.gompertz_rate(0.5, 1.0) == pytest.approx(0.5 * math.log(2))
    p = MacroParams(0.5, 1.0)
    # 0.5 * 0.5 ln 2 + 0.5 * 0.25
    assert macro.combined_rate(0.5, p) == pytest.approx(0.29828679513998635, rel=1e-12)


def test_rates_vanish_at_fixed_points():
    for I in (0.0, 1.0):
        assert macro.combined_rate(I, MacroParams(0.3, 10.0)) == 0.0


def test_closed_forms_start_at_I0():
    p = MacroParams(0.5, 7.0, t0=3.0, I0=0.05)
    assert macro.logistic_closed(3.0, p) == pytest.approx(0.05)
    assert macro.gompertz_closed(3.0, p) == pytest.approx(0.05)


def test_gompertz_closed_example():
    # I0 = e^-1 and t = tau ln 2 give exp(-1 * 1/2)
    p = MacroParams(1.0, 1.0, I0=math.exp(-1.0))
    assert macro.gompertz_closed(math.log(2.0), p) == pytest.approx(0.6065306597126334, rel=1e-12)


def test_logistic_closed_midpoint():
    p = MacroParams(0.0, 2.0, I0=0.1)
    t_half = 2.0 * math.log(9.0)
    assert macro.logistic_closed(t_half, p) == pytest.approx(0.5)


@pytest.mark.parametrize("lam,closed", [(0.0, macro.logistic_closed), (1.0, macro.gompertz_closed)])
def test_rk4_matches_closed_forms(lam, closed):
    p = MacroParams.for_swarm(lam, 1000.0, 0.0, 20)
    grid = np.linspace(0.0, 10000.0, 2001)
    assert np.max(np.abs(macro.integrate_combined(p, grid) - closed(grid, p))) <= 1e-6


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_rk4_matches_independent_solver(lam):
    p = MacroParams(lam, 50.0, t0=10.0, I0=0.02)
    grid = np.linspace(10.0, 510.0, 101)
    ref = integrate.solve_ivp(lambda t, y: macro.combined_rate(y, p), (10.0, 510.0), [0.02],
                              t_eval=grid, rtol=1e-11, atol=1e-13, method="DOP853").y[0]
    assert np.max(np.abs(macro.integrate_combined(p, grid) - ref)) <= 1e-8


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(0.0, 1.0), I0=st.floats(1e-4, 0.9), tau=st.floats(0.1, 1e4))
def test_solution_monotone_and_bounded(lam, I0, tau):
    p = MacroParams(lam, tau, I0=I0)
    grid = np.linspace(0.0, 20 * tau, 200)
    I = macro.integrate_combined(p, grid)
    assert np.all(np.diff(I) >= -1e-15)
    assert I.min() >= I0 - 1e-15 and I.max() <= 1.0
    blend = macro.mdl_blend(grid, p)
    assert np.all(np.diff(blend) >= -1e-15)
    assert blend[0] == pytest.approx(I0)


def test_grid_validation():
    p = MacroParams(0.5, 10.0, t0=5.0)
    with pytest.raises(ValueError):
        macro.integrate_combined(p, [0.0, 1.0])
    with pytest.raises(ValueError):
        macro.integrate_combined(p, [5.0, 5.0, 6.0])
    assert macro.integrate_combined(p, [5.0]).tolist() == [0.05]


@pytest.mark.parametrize("kw", [dict(lam=1.5, tau=1.0), dict(lam=0.5, tau=0.0),
                                dict(lam=0.5, tau=1.0, I0=0.0), dict(lam=0.5, tau=1.0, I0=1.0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        MacroParams(**kw)


def test_curve_csv():
    assert macro.curve_csv([0.0, 1.5], [0.05, 0.5]) == "t,I_model\r\n0.000,0.05\r\n1.500,0.5\r\n"


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_blend_sup_distance_from_ode(lam):
    # The blend only approximates the mixed ODE; this pins the sup-norm gap
    # at 0.05 over [t0, t0 + 10 tau] with I0 = 1/20.
    p = MacroParams.for_swarm(lam, 1000.0, 0.0, 20)
    grid = np.linspace(0.0, 10000.0, 1000)
    gap = np.max(np.abs(macro.mdl_blend(grid, p) - macro.integrate_combined(p, grid)))
    assert gap <= 0.05
