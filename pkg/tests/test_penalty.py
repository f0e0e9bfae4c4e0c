import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from indiff.domain import GridSpec, ModelParams, ValidationError
from indiff.penalty import (DiscreteOperator, PenaltySettings, PenaltyShape, beta_eps,
                            c0_for_truncation, k_constant, pi_eps, solve_penalized,
                            step_penalized)


def test_c0_examples():
    p = ModelParams(c=1.0, rho=0.0, lam=0.0, gamma=1.0)
    assert c0_for_truncation(0.0, p) == pytest.approx(0.5)
    q = ModelParams(rho=0.5, c=0.3, lam=0.4, gamma=1.0)
    assert c0_for_truncation(2.0, q) == pytest.approx(0.06 * math.e**2 + 0.03375 * math.e**4)


@given(st.floats(0, 5), st.floats(0.05, 1), st.floats(0, 0.99), st.floats(0, 1),
       st.floats(0.01, 5))
def test_c0_positive(N, c, rho, lam, gamma):
    p = ModelParams(c=c, rho=rho, lam=lam, gamma=gamma)
    assert c0_for_truncation(N, p) > 0


def test_k_constant_is_max_of_two_branches():
    p = ModelParams(b=0.2)
    a = p.quad_coef
    mu = p.drift - 0.5 * p.c**2
    expect = max(p.c**2 + mu**2 / (2 * a),
                 p.c**2 + (a * math.exp(max(p.drift, 0) * p.T) - mu) ** 2 / (2 * a))
    assert k_constant(p) == pytest.approx(expect)


@pytest.mark.parametrize("kind", ["exponential", "cubic"])
def test_beta_examples(kind):
    c0, eps = 2.0, 1e-3
    v, _ = beta_eps(0.0, c0, eps, kind)
    assert v == pytest.approx(-c0)
    v, _ = beta_eps(1.0, c0, eps, kind)
    assert abs(v) < 1e-12
    vals = [float(beta_eps(-1.0, c0, e, kind)[0]) for e in (eps, eps / 2, eps / 4)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("kind", ["exponential", "cubic"])
def test_penalty_shape_check(kind):
    assert PenaltyShape(1.5, 1e-2, kind).check()


@given(st.floats(-1, 1), st.floats(1e-6, 1e-1))
def test_beta_monotone_nonpositive(t, eps):
    v, d = beta_eps(np.array([t, t + eps / 10]), 1.0, eps)
    assert np.all(v <= 0) and np.all(d >= 0) and v[1] >= v[0]


def test_beta_derivative_matches_finite_difference():
    t = np.linspace(-0.05, 0.05, 101)
    eps, h = 1e-2, 1e-7
    _, d = beta_eps(t, 1.0, eps)
    fd = (beta_eps(t + h, 1.0, eps)[0] - beta_eps(t - h, 1.0, eps)[0]) / (2 * h)
    assert np.allclose(d, fd, rtol=1e-5, atol=1e-6)


def test_pi_examples():
    eps = 0.01
    assert pi_eps(2 * eps, eps) == 2 * eps
    assert pi_eps(-2 * eps, eps) == 0.0
    assert pi_eps(0.0, eps) == pytest.approx(eps / 4)


@given(st.floats(-1, 1), st.floats(1e-6, 1))
def test_pi_properties(t, eps):
    h = 1e-3 * eps
    v = pi_eps(t, eps)
    slope = (pi_eps(t + h, eps) - pi_eps(t - h, eps)) / (2 * h)
    assert v >= max(t, 0.0) - 1e-15
    assert v <= max(t, 0.0) + eps / 4 + 1e-15
    assert -1e-6 <= slope <= 1 + 1e-6


class _PureDiffusion(DiscreteOperator):
    mu = 0.0
    a = 0.0


def test_one_unknown_hand_solution():
    # symmetric 3-node toy: the sum is conserved, the bump decays by 1/(1+2r)
    p = ModelParams()
    g = GridSpec(-1.0, 1.0, 3, 1, 1.0)
    op = _PureDiffusion(g, p, grad_left=0.0, grad_right=0.0)
    k = 0.1
    s = PenaltySettings(1e-2, 1.0)
    prev = np.array([1.0, 2.0, 1.0])
    u, _ = step_penalized(prev, k, s, p, g, op=op, obstacle=np.full(3, -100.0), c0=1e-30)
    r = 2 * op.diff * k / g.dx**2
    w_minus_v = 1.0 / (1.0 + 2.0 * r)
    assert u[1] - u[0] == pytest.approx(w_minus_v, rel=1e-12)
    assert u[0] + u[1] == pytest.approx(3.0, rel=1e-12)
    assert u[0] == pytest.approx(u[2], abs=1e-14)


def test_operator_exact_on_neumann_compatible_linear():
    p = ModelParams()
    g = GridSpec(-1.0, 1.0, 41, 10, 1.0)
    op = DiscreteOperator(g, p, grad_left=0.5, grad_right=0.5)
    u = 0.5 * g.x
    Lu = op.apply(u)
    assert np.allclose(Lu, op.mu * 0.5 - 0.5 * op.a * 0.25, atol=1e-12)


def _grid(p):
    return GridSpec.centered(p, half_width=2.0, n_x=81, n_theta=40)


def test_step_is_fixed_point_for_tiny_step():
    p = ModelParams()
    g = _grid(p)
    s = PenaltySettings(1e-2, 2.0)
    run = solve_penalized(s, g, p)
    row = run.surface.values[-1]
    u, _ = step_penalized(row, 1e-12, s, p, g, c0=run.c0)
    assert np.max(np.abs(u - row)) < 1e-9


def test_first_step_increases():
    p = ModelParams()
    g = _grid(p)
    s = PenaltySettings(1e-2, 2.0)
    run = solve_penalized(s, g, p)
    v = run.surface.values
    assert np.all(v[1] >= v[0] - 1e-13)
    assert np.array_equal(v[0], pi_eps(np.exp(g.x) - p.K, 1e-2))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 0.5), st.integers(0, 80))
def test_discrete_comparison(bump, node):
    p = ModelParams()
    g = _grid(p)
    s = PenaltySettings(1e-2, 2.0)
    c0 = s.penalty_floor(p)
    base = pi_eps(np.exp(g.x) - p.K, 1e-2)
    higher = base.copy()
    higher[node] += bump
    lo, _ = step_penalized(base, g.dtheta, s, p, g, c0=c0)
    hi, _ = step_penalized(higher, g.dtheta, s, p, g, c0=c0)
    assert np.all(hi >= lo - 1e-12)


def test_epsilon_cauchy_and_deep_otm():
    p = ModelParams()
    g = _grid(p)
    surfs = [solve_penalized(PenaltySettings(e, 2.0), g, p).surface.values
             for e in (1e-2, 5e-3, 2.5e-3)]
    d1 = np.max(np.abs(surfs[1] - surfs[0]))
    d2 = np.max(np.abs(surfs[2] - surfs[1]))
    assert d2 < d1
    # the penalty floor keeps u about eps*ln(C0) above zero out of the money
    run_last = surfs[-1]
    assert 0.0 <= run_last[-1, 0] < 10 * 2.5e-3


def test_truncation_window_enforced():
    p = ModelParams()
    with pytest.raises(ValidationError):
        solve_penalized(PenaltySettings(1e-2, 1.0), _grid(p), p)
