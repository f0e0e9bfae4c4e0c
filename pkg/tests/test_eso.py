import math

import numpy as np
import pytest

from indiff.domain import GridSpec, ModelParams, OutOfDomainError, Surface, ValidationError, payoff
from indiff.eso import (ESOSpec, eso_cost, pre_vesting_mc, solve_eso, solve_post_vesting,
                        solve_pre_vesting, vesting_row)
from indiff.oracle import TreeSpec, binomial_american, european_call
from indiff.penalty import SolverError
from indiff.pricing import PriceModel
from indiff.vi import FreeBoundary


@pytest.fixture(scope="module")
def p0():
    return ModelParams(b=0.0)


@pytest.fixture(scope="module")
def grid(p0):
    return GridSpec.centered(p0, half_width=3.0, n_x=151, n_theta=200)


@pytest.fixture(scope="module")
def model(p0, grid):
    return PriceModel.build(p0, grid)


def test_spec_validation():
    with pytest.raises(ValidationError):
        ESOSpec(ModelParams(), 0.1, 0.25)
    with pytest.raises(ValidationError):
        ESOSpec(ModelParams(b=0.0), -0.1, 0.25)
    with pytest.raises(ValidationError):
        ESOSpec(ModelParams(b=0.0), 0.1, 1.0)


def test_vesting_must_be_on_grid(p0, grid):
    with pytest.raises(ValidationError):
        vesting_row(ESOSpec(p0, 0.1, 0.2501), grid)
    assert vesting_row(ESOSpec(p0, 0.1, 0.25), grid) == 150


def test_european_limit(p0, grid):
    sol = solve_eso(ESOSpec(p0, 0.0, 0.25), None, grid)
    for y in (0.8, 1.0, 1.25):
        ref = european_call(y, p0.K, p0.c, p0.T)
        assert eso_cost(y, 0.0, sol) == pytest.approx(ref, rel=5e-3)


def test_terminal_row_and_positivity(p0, grid, model):
    sol = solve_eso(ESOSpec(p0, 0.3, 0.25), model.boundary, grid)
    assert np.array_equal(sol.post_vesting.values[0], payoff(grid.x, p0.K))
    assert sol.pre_vesting.values.min() >= 0 and sol.post_vesting.values.min() >= 0
    assert np.all(sol.post_vesting.values <= np.exp(grid.x)[None, :] + 1e-12)
    for y in (0.7, 1.0, 1.6):
        assert eso_cost(y, p0.T, sol) == pytest.approx(max(y - p0.K, 0), abs=2e-3)


@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_flat_identity(p0, grid, alpha):
    spec = ESOSpec(p0, alpha, 0.25)
    jv = vesting_row(spec, grid)
    sub = GridSpec(grid.x_min, grid.x_max, grid.n_x, jv, p0.T - 0.25)
    pre = solve_pre_vesting(spec, Surface(sub, np.full((jv + 1, grid.n_x), 2.5)))
    expect = 2.5 * np.exp(-alpha * pre.grid.theta)[:, None]
    assert np.max(np.abs(pre.values - expect)) <= 1e-10


def test_seam_and_alpha_monotone(p0, grid, model):
    sols = [solve_eso(ESOSpec(p0, a, 0.25), model.boundary, grid) for a in (0.0, 0.1, 0.5)]
    assert max(s.seam_gap for s in sols) <= 1e-10
    for t_v_side in (0.25 - 1e-9, 0.25):
        vals = [eso_cost(1.0, t_v_side, s) for s in sols]
        assert vals[0] >= vals[1] >= vals[2]
    for lo, hi in zip(sols, sols[1:]):
        assert np.all(lo.pre_vesting.values >= hi.pre_vesting.values - 1e-12)


def test_large_alpha_forces_intrinsic(p0, grid, model):
    sol = solve_post_vesting(ESOSpec(p0, 1e7, 0.25), model.boundary, grid)
    assert np.max(np.abs(sol.values[-1] - payoff(grid.x, p0.K))) < 1e-5


def test_pre_vesting_matches_mc(p0, grid, model):
    spec = ESOSpec(p0, 0.3, 0.25)
    sol = solve_eso(spec, model.boundary, grid)
    est, se = pre_vesting_mc(spec, sol.post_vesting, 1.0, n_paths=200_000)
    assert abs(eso_cost(1.0, 0.0, sol) - est) <= 3 * se + 1e-3


def test_between_intrinsic_and_european(p0, grid, model):
    # driftless call: the American value equals the European one, and any
    # suboptimal exercise rule can only lose value
    g = grid
    sol = solve_eso(ESOSpec(p0, 0.0, g.dtheta), model.boundary, g)
    c = eso_cost(1.2, 0.0, sol)
    am = binomial_american(TreeSpec(2000, 0.0, p0.c, p0.K, p0.T), 1.2)
    assert 0.2 <= c <= am * (1 + 5e-3)


def test_censored_boundary_raises(p0, grid):
    th = grid.theta[1:]
    fb = FreeBoundary(th, np.full(th.size, np.nan), 0.0, np.ones(th.size, dtype=bool))
    with pytest.raises(SolverError, match="widen"):
        solve_post_vesting(ESOSpec(p0, 0.1, 0.25), fb, grid)


def test_cost_out_of_domain(p0, grid):
    sol = solve_eso(ESOSpec(p0, 0.0, 0.25), None, grid)
    with pytest.raises(OutOfDomainError):
        eso_cost(1e3, 0.0, sol)
    with pytest.raises(OutOfDomainError):
        eso_cost(1.0, 2.0, sol)
