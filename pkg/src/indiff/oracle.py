"""Independent reference computations.

Nothing here touches the implicit stepper in ``penalty``. The binomial tree
covers the linear (gamma -> 0) limit. The explicit scheme re-discretizes the
nonlinear obstacle problem from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import GridSpec, ModelParams, Surface, ValidationError


@dataclass(frozen=True)
class TreeSpec:
    n_steps: int
    drift: float
    vol: float
    strike: float
    maturity: float

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValidationError("n_steps must be at least 1")
        if self.vol < 0 or self.strike <= 0 or self.maturity <= 0:
            raise ValidationError("invalid tree parameters")

    @classmethod
    def from_params(cls, p: ModelParams, n_steps: int = 2000) -> "TreeSpec":
        return cls(n_steps, p.drift, p.c, p.K, p.T)


def binomial_american(tree: TreeSpec, y0: float) -> float:
    """American call on a lognormal asset with drift ``tree.drift``, no discounting.

    CRR lattice; with zero volatility it degenerates to the deterministic path.
    """
    n, dt = tree.n_steps, tree.maturity / tree.n_steps
    K = tree.strike
    if tree.vol == 0.0:
        path = y0 * np.exp(tree.drift * dt * np.arange(n + 1))
        return float(np.max(np.maximum(path - K, 0.0)))
    up = math.exp(tree.vol * math.sqrt(dt))
    dn = 1.0 / up
    q = (math.exp(tree.drift * dt) - dn) / (up - dn)
    if not 0.0 < q < 1.0:
        raise ValidationError(f"tree probability {q:.4f} outside (0,1); increase n_steps")
    j = np.arange(n + 1)
    y = y0 * up ** (2 * j - n)
    v = np.maximum(y - K, 0.0)
    for step in range(n - 1, -1, -1):
        y = y[1:] * dn
        v = q * v[1:] + (1.0 - q) * v[:-1]
        np.maximum(v, y - K, out=v)
    return float(v[0])


def european_call(y0: float, K: float, vol: float, tau: float, drift: float = 0.0) -> float:
    """Undiscounted lognormal call expectation ``E[(Y_tau - K)^+]``."""
    if tau <= 0 or vol == 0:
        return max(y0 * math.exp(drift * max(tau, 0.0)) - K, 0.0)
    sd = vol * math.sqrt(tau)
    fwd = y0 * math.exp(drift * tau)
    d1 = (math.log(fwd / K) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return fwd * _ncdf(d1) - K * _ncdf(d2)


def _ncdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def explicit_grid(p: ModelParams, half_width: float = 1.0, n_x: int = 51,
                  n_theta: int = 2000) -> GridSpec:
    lk = math.log(p.K)
    return GridSpec(lk - half_width, lk + half_width, n_x, n_theta, p.T)


def explicit_fd_small(grid: GridSpec, p: ModelParams) -> Surface:
    """Forward-Euler march of the obstacle problem with node-wise projection.

    Limited to at most 51 x 2000 nodes; requires ``dtheta <= dx^2 / c^2``.
    """
    if grid.n_x > 51 or grid.n_theta > 2000:
        raise ValidationError("explicit oracle grid limited to 51 x 2000")
    h, k = grid.dx, grid.dtheta
    if k > h * h / p.c**2:
        raise ValidationError(f"CFL violated: dtheta={k:.3g} > dx^2/c^2={h * h / p.c**2:.3g}")
    x = np.linspace(grid.x_min, grid.x_max, grid.n_x)
    g = np.maximum(np.exp(x) - p.K, 0.0)
    half_var = 0.5 * p.c**2
    mu = p.b - p.rho * p.c * p.lam - half_var
    quad = 0.5 * p.gamma * (1.0 - p.rho**2) * p.c**2
    out = np.empty((grid.n_theta + 1, grid.n_x))
    u = g.copy()
    out[0] = u
    for j in range(1, grid.n_theta + 1):
        ux = (u[2:] - u[:-2]) / (2 * h)
        uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / (h * h)
        new = np.empty_like(u)
        new[1:-1] = u[1:-1] + k * (half_var * uxx + mu * ux - quad * ux * ux)
        # first-order Neumann closures: flat on the left, slope e^x on the right
        new[0] = new[1]
        new[-1] = new[-2] + h * math.exp(x[-1] - 0.5 * h)
        u = np.maximum(new, g)
        out[j] = u
    return Surface(grid, out)


@dataclass
class ProbeResult:
    name: str
    worst: float
    location: tuple[float, float] | None
    slack: float

    @property
    def passed(self) -> bool:
        return self.worst >= -self.slack


def _inner_window(grid: GridSpec, frac: float = 0.8) -> slice:
    n = grid.n_x
    cut = int(round(n * (1 - frac) / 2))
    return slice(cut, n - cut)


def monotonicity_probe(p: ModelParams, grid: GridSpec,
                       solve: Callable[..., object] | None = None, *,
                       bumps: dict | None = None) -> list[ProbeResult]:
    """Re-solve under parameter bumps and check the price orderings node-wise.

    ``bumps`` maps ``gamma``, ``lam``, ``b`` to bumped values (defaults: 2.0,
    0.6, 0.10). ``solve(grid, params, scale=...)`` must return an object with
    ``.surface.values``; defaults to the penalty-continuation solver.
    """
    if solve is None:
        from .vi import solve_vi_penalty as solve
    bumps = {"gamma": 2.0, "lam": 0.6, "b": 0.10, **(bumps or {})}
    slack = 10.0 * (grid.dx + grid.dtheta)
    win = _inner_window(grid)
    base = solve(grid, p).surface.values
    x, th = grid.x, grid.theta

    def report(name, margin):
        m = margin[:, win]
        idx = np.unravel_index(np.argmin(m), m.shape)
        loc = (float(x[win][idx[1]]), float(th[idx[0]]))
        return ProbeResult(name, float(m[idx]), loc, slack)

    results = []
    # P decreases in gamma and lam, increases in b
    for key, sign in (("gamma", -1.0), ("lam", -1.0), ("b", 1.0)):
        bumped_p = p.replace(**{key: bumps[key]})
        if (bumps[key] - getattr(p, key)) <= 0:
            raise ValidationError(f"bump for {key} must increase the parameter")
        bumped = solve(grid, bumped_p).surface.values
        margin = (base - bumped) if sign < 0 else (bumped - base)
        results.append(report(f"monotone_{key}", margin))
    scaled = solve(grid, p, scale=2.0).surface.values
    results.append(report("sublinear_n2", 2.0 * base - scaled))
    return results
