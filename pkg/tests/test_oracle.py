import math

import pytest

from indiff.domain import ModelParams, ValidationError
from indiff.oracle import (TreeSpec, binomial_american, european_call, explicit_fd_small,
                           explicit_grid, monotonicity_probe)
from indiff.domain import GridSpec


def test_binomial_zero_vol_is_deterministic():
    t = TreeSpec(50, 0.1, 0.0, 1.0, 1.0)
    assert binomial_american(t, 1.0) == pytest.approx(math.exp(0.1) - 1.0)
    assert binomial_american(TreeSpec(50, -0.1, 0.0, 1.0, 1.0), 1.2) == pytest.approx(0.2)


def test_binomial_nonneg_drift_matches_european():
    # no early exercise premium for a call when the drift is non-negative
    t = TreeSpec(2000, 0.0, 0.3, 1.0, 1.0)
    assert binomial_american(t, 1.0) == pytest.approx(european_call(1.0, 1.0, 0.3, 1.0), rel=1e-3)
    t = TreeSpec(2000, 0.05, 0.3, 1.0, 1.0)
    assert binomial_american(t, 1.0) == pytest.approx(
        european_call(1.0, 1.0, 0.3, 1.0, drift=0.05), rel=1e-3)


def test_binomial_negative_drift_has_premium():
    t = TreeSpec(2000, -0.2, 0.3, 1.0, 1.0)
    am = binomial_american(t, 1.3)
    assert am > european_call(1.3, 1.0, 0.3, 1.0, drift=-0.2)
    assert am >= 0.3 - 1e-12


def test_european_call_put_parity():
    y, K, v, tau, d = 1.2, 1.0, 0.25, 0.7, 0.03
    call = european_call(y, K, v, tau, d)
    # E[Y - K] = y e^{d tau} - K
    put = call - (y * math.exp(d * tau) - K)
    assert put > 0


def test_explicit_limits():
    p = ModelParams()
    with pytest.raises(ValidationError):
        explicit_fd_small(GridSpec(-1.0, 1.0, 61, 100, 1.0), p)
    with pytest.raises(ValidationError):
        explicit_fd_small(GridSpec(-1.0, 1.0, 51, 10, 1.0), p)


def test_explicit_oracle_bounds():
    p = ModelParams()
    g = explicit_grid(p)
    s = explicit_fd_small(g, p)
    k = g.kink_index(p.K)
    assert 0.09 < s.values[-1, k] < 0.12


def test_probe_reports_all_properties():
    p = ModelParams()
    g = GridSpec.centered(p, half_width=2.0, n_x=81, n_theta=50)
    res = monotonicity_probe(p, g)
    assert [r.name for r in res] == ["monotone_gamma", "monotone_lam", "monotone_b", "sublinear_n2"]
    assert all(r.passed for r in res)


def test_probe_rejects_decreasing_bump():
    p = ModelParams()
    g = GridSpec.centered(p, half_width=2.0, n_x=41, n_theta=10)
    with pytest.raises(ValidationError):
        monotonicity_probe(p, g, bumps={"gamma": 0.5})
