import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from indiff.domain import GridSpec, ModelParams, OutOfDomainError, ValueQuery
from indiff.pricing import PriceModel, forward_performance, inverse_forward_performance
from indiff.vi import x0_limit


def test_forward_performance_examples():
    p = ModelParams()
    assert forward_performance(0.0, 0.0, p) == -1.0
    q = p.replace(lam=0.0)
    assert forward_performance(1.3, 0.7, q) == pytest.approx(-math.exp(-q.gamma * 1.3))


@given(st.floats(-5, 5), st.floats(0, 1))
def test_forward_performance_inverse(w, t):
    p = ModelParams()
    assert inverse_forward_performance(forward_performance(w, t, p), t, p) == pytest.approx(w, abs=1e-12)


def test_terminal_and_lower_bound(ref_model, ref_params):
    x = ref_model.grid.x
    for y in np.exp(x[::37]):
        assert ref_model.indifference_price(y, ref_params.T) == max(np.exp(np.log(y)) - 1, 0)
    for y in (0.5, 1.0, 1.3, 2.0):
        for t in (0.0, 0.5):
            assert ref_model.indifference_price(y, t) >= max(y - 1, 0) - 1e-12


def test_price_decreasing_in_time(ref_model):
    ts = np.linspace(0, 1, 21)
    for y in (0.8, 1.0, 1.2):
        vals = [ref_model.indifference_price(y, t) for t in ts]
        assert np.all(np.diff(vals) <= 1e-12)


def test_value_function_structure(ref_model, ref_params):
    p = ref_params
    v0 = ref_model.value_function(ValueQuery(0.0, 1.1, 0.3))
    v1 = ref_model.value_function(ValueQuery(0.4, 1.1, 0.3))
    assert v1 == pytest.approx(v0 * math.exp(-p.gamma * 0.4), rel=1e-12)
    y = math.exp(ref_model.grid.x[215])
    vt = ref_model.value_function(ValueQuery(0.2, y, p.T))
    assert vt == pytest.approx(float(forward_performance(0.2 + y - p.K, p.T, p)), rel=1e-12)
    for w in (-1.0, 0.0, 2.0):
        q = ValueQuery(w, 1.1, 0.3)
        assert ref_model.value_function(q) * math.exp(p.gamma * w) == pytest.approx(
            v0, rel=1e-12)


def test_value_gradient_bound(ref_model, ref_params):
    p = ref_params
    h = 1e-4
    dpos = max(p.drift, 0)
    for y in (0.7, 1.0, 1.4):
        for t in (0.0, 0.5):
            v = ref_model.value_function(ValueQuery(0.0, y, t))
            dv = (ref_model.value_function(ValueQuery(0.0, y + h, t))
                  - ref_model.value_function(ValueQuery(0.0, y - h, t))) / (2 * h)
            assert abs(dv) <= p.gamma * math.exp(dpos * (p.T - t)) * abs(v) * (1 + 1e-2)


def test_hedge(ref_model, ref_params):
    p = ref_params
    merton = p.lam / (p.sigma * p.gamma)
    assert ref_model.hedge_ratio(0.05, 0.0) == pytest.approx(merton, abs=1e-6)
    dpos = max(p.drift, 0)
    for y in (0.5, 1.0, 1.5, 3.0):
        for t in (0.0, 0.5, 0.9):
            dev = abs(ref_model.hedge_ratio(y, t) - merton)
            assert dev <= p.rho * p.c / p.sigma * y * math.exp(dpos * (p.T - t)) * (1 + 0.05)


def test_hedge_rho_zero_exact():
    p = ModelParams(rho=0.0)
    m = PriceModel.build(p, GridSpec.centered(p, half_width=3.0, n_x=121, n_theta=60))
    for y in (0.6, 1.0, 1.7):
        assert m.hedge_ratio(y, 0.2) == p.lam / (p.sigma * p.gamma)


def test_exercise_boundary(ref_model, ref_params):
    p = ref_params
    ts = np.linspace(0.0, p.T - 0.0025, 50)
    ys = [ref_model.exercise_boundary(t) for t in ts]
    assert np.all(np.diff(ys) <= 1e-12)
    assert np.all(np.array(ys) >= p.K - 1e-12)
    g = ref_model.grid
    near_T = ref_model.exercise_boundary(p.T - g.dtheta)
    assert abs(math.log(near_T) - x0_limit(p)) <= g.dx
    with pytest.raises(OutOfDomainError):
        ref_model.exercise_boundary(p.T)


def test_exercise_boundary_positive_drift():
    p = ModelParams(b=0.15)
    m = PriceModel.build(p, GridSpec.centered(p, half_width=3.0, n_x=151, n_theta=100),
                         contact_tol=3e-5)
    floor = max(p.K, 2 * p.drift / p.quad_coef)
    for t in (0.0, 0.5, 0.98):
        assert m.exercise_boundary(t) >= floor * math.exp(-m.grid.dx)


def test_out_of_window(ref_model):
    with pytest.raises(OutOfDomainError):
        ref_model.indifference_price(100.0, 0.0)
    with pytest.raises(OutOfDomainError):
        ref_model.indifference_price(1.0, 1.5)
    with pytest.raises(OutOfDomainError):
        ref_model.hedge_ratio(-1.0, 0.0)


def test_bound_check(ref_model):
    b = ref_model.bound_check()
    assert b["price_lower"] >= -1e-12
    assert b["price_upper"] >= 0
    assert b["dPdy_lower"] >= -1e-12


def test_projected_model_matches(ref_params):
    g = GridSpec.centered(ref_params, half_width=3.0, n_x=121, n_theta=60)
    a = PriceModel.build(ref_params, g)
    b = PriceModel.build(ref_params, g, method="projected")
    assert a.indifference_price(1.0, 0.0) == pytest.approx(b.indifference_price(1.0, 0.0), rel=1e-3)
    with pytest.raises(ValueError):
        PriceModel.build(ref_params, g, method="bogus")
