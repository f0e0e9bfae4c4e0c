"""Employee stock option cost with vesting and exogenous job termination.

The employee exercises at the indifference boundary ``y*(t)``; the firm's
cost is then evaluated risk-neutrally with ``b = 0``. After vesting, a
termination at rate ``alpha`` forces exercise at intrinsic value; before
vesting it forfeits the option. In log space with ``theta = T - t``:

    post:  C_theta = c^2/2 (C_xx - C_x) - alpha C + alpha g,  C = g at x >= s(theta)
    pre:   C_theta = c^2/2 (C_xx - C_x) - alpha C
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .domain import (GridSpec, ModelParams, OutOfDomainError, Surface, ValidationError,
                     payoff, validate_params)
from .penalty import SolverError
from .vi import FreeBoundary


@dataclass(frozen=True)
class ESOSpec:
    base: ModelParams
    alpha: float
    t_v: float

    def __post_init__(self):
        validate_params(self.base)
        if self.base.b != 0.0:
            raise ValidationError("ESO valuation requires b = 0")
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 < self.t_v < self.base.T:
            raise ValidationError(f"t_v={self.t_v} must lie in (0, T)")


@dataclass(frozen=True)
class ESOSolution:
    spec: ESOSpec
    post_vesting: Surface   # theta = T - t on [0, T - t_v]
    pre_vesting: Surface    # local theta' = t_v - t on [0, t_v]
    boundary: FreeBoundary | None

    @property
    def seam_gap(self) -> float:
        return float(np.max(np.abs(self.post_vesting.values[-1] - self.pre_vesting.values[0])))


def vesting_row(spec: ESOSpec, grid: GridSpec) -> int:
    """Row of the pricing grid sitting at ``t_v``; the vesting date must be on the grid."""
    jv = (spec.base.T - spec.t_v) / grid.dtheta
    j = int(round(jv))
    if abs(jv - j) > 1e-9 or not 0 < j < grid.n_theta:
        raise ValidationError(f"t_v={spec.t_v} is not on the time grid (dtheta={grid.dtheta})")
    return j


def _diffusion_bands(n: int, h: float, c: float, dt: float, alpha: float) -> np.ndarray:
    """Implicit-Euler matrix for ``C_theta = c^2/2 (C_xx - C_x) - alpha C``, interior rows."""
    d = 0.5 * c * c
    lo = d / h**2 + d / (2 * h)
    hi = d / h**2 - d / (2 * h)
    ab = np.zeros((3, n))
    ab[1, :] = 1.0 / dt + 2 * d / h**2 + alpha
    ab[0, 1:] = -hi
    ab[2, :-1] = -lo
    return ab


def _pin_rows(ab: np.ndarray, rows: np.ndarray) -> None:
    """Turn the listed rows into identity rows (Dirichlet or pure ODE rows)."""
    n = ab.shape[1]
    for i in rows:
        ab[1, i] = 1.0
        if i + 1 < n:
            ab[0, i + 1] = 0.0
        if i - 1 >= 0:
            ab[2, i - 1] = 0.0


def solve_post_vesting(spec: ESOSpec, boundary: FreeBoundary | None, grid: GridSpec) -> Surface:
    """Backward solve on ``[t_v, T]`` with Dirichlet ``C = g`` at and above ``y*``.

    ``boundary=None`` means the employee never exercises voluntarily. The
    left edge uses the degenerate equation ``C_theta = -alpha C + alpha g``;
    the right edge is pinned to the payoff.
    """
    p = spec.base
    grid.check_against(p)
    jv = vesting_row(spec, grid)
    x, h, dt, n = grid.x, grid.dx, grid.dtheta, grid.n_x
    g = payoff(x, p.K)
    a = spec.alpha
    base_ab = _diffusion_bands(n, h, p.c, dt, a)
    out = np.empty((jv + 1, n))
    out[0] = g
    for j in range(1, jv + 1):
        if boundary is None:
            first = n - 1
        else:
            s = boundary.s_at(j * dt)
            if math.isinf(s):
                raise SolverError(
                    f"exercise boundary censored at theta={j * dt:.4g}; widen the pricing grid"
                )
            first = min(int(np.searchsorted(x, s - 1e-12)), n - 1)
        ab = base_ab.copy()
        rhs = out[j - 1] / dt + a * g
        _pin_rows(ab, np.arange(first, n))
        rhs[first:] = g[first:]
        # degenerate left row: (1/dt + alpha) C = C_prev/dt + alpha g
        if first > 0:
            _pin_rows(ab, [0])
            rhs[0] = (out[j - 1, 0] / dt + a * g[0]) / (1.0 / dt + a)
        row = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(row)):
            raise SolverError("post-vesting solve produced non-finite values")
        out[j] = np.maximum(row, 0.0)
    sub = GridSpec(grid.x_min, grid.x_max, n, jv, p.T - spec.t_v)
    return Surface(sub, out)


def solve_pre_vesting(spec: ESOSpec, post: Surface) -> Surface:
    """Linear killed problem on ``[0, t_v]`` from the post-vesting row at ``t_v``.

    Solved for ``D = e^{alpha (t_v - t)} C``, which removes the killing, so
    spatially flat data stay flat to roundoff. Both edges use ``D_theta = 0``.
    """
    p = spec.base
    g_post = post.grid
    dt = g_post.dtheta
    m = int(round(spec.t_v / dt))
    if abs(m * dt - spec.t_v) > 1e-9 * max(1.0, spec.t_v):
        raise ValidationError("t_v is not a multiple of the time step")
    n = g_post.n_x
    ab = _diffusion_bands(n, g_post.dx, p.c, dt, 0.0)
    _pin_rows(ab, [0, n - 1])
    D = np.empty((m + 1, n))
    D[0] = post.values[-1]
    for j in range(1, m + 1):
        rhs = D[j - 1] / dt
        rhs[0], rhs[-1] = D[j - 1, 0], D[j - 1, -1]
        D[j] = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(D)):
        raise SolverError("pre-vesting solve produced non-finite values")
    theta = np.arange(m + 1) * dt
    C = D * np.exp(-spec.alpha * theta)[:, None]
    C[0] = post.values[-1]
    sub = GridSpec(g_post.x_min, g_post.x_max, n, m, spec.t_v)
    return Surface(sub, np.maximum(C, 0.0))


def solve_eso(spec: ESOSpec, boundary: FreeBoundary | None, grid: GridSpec) -> ESOSolution:
    post = solve_post_vesting(spec, boundary, grid)
    pre = solve_pre_vesting(spec, post)
    return ESOSolution(spec, post, pre, boundary)


def eso_cost(y: float, t: float, sol: ESOSolution) -> float:
    """ESO cost at ``(y, t)`` by bilinear interpolation on the relevant stage."""
    spec = sol.spec
    T = spec.base.T
    if not y > 0:
        raise OutOfDomainError(f"y must be positive, got {y}")
    if not 0.0 <= t <= T:
        raise OutOfDomainError(f"t={t} outside [0, {T}]")
    x = math.log(y)
    if t >= spec.t_v:
        return sol.post_vesting.interpolate(x, min(T - t, T - spec.t_v))
    return sol.pre_vesting.interpolate(x, spec.t_v - t)


def pre_vesting_mc(spec: ESOSpec, post: Surface, y0: float, n_paths: int = 100_000,
                   seed: int = 2024) -> tuple[float, float]:
    """Monte-Carlo ``e^{-alpha t_v} E[C(Y_{t_v}, t_v)]`` for driftless lognormal ``Y``.

    The post-vesting row is interpolated linearly in ``x`` and held flat
    outside the window. Returns ``(estimate, std_error)``.
    """
    p = spec.base
    rng = np.random.default_rng(seed)
    sd = p.c * math.sqrt(spec.t_v)
    xs = math.log(y0) - 0.5 * sd * sd + sd * rng.standard_normal(n_paths)
    vals = np.interp(xs, post.grid.x, post.values[-1]) * math.exp(-spec.alpha * spec.t_v)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_paths))
