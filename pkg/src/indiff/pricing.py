"""Indifference price, value function, hedge and exercise boundary.

``P(y, t) = u(ln y, T - t)`` where ``u`` solves the forward obstacle
problem; the price does not depend on initial wealth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import (GridSpec, ModelParams, OutOfDomainError, Surface, ValueQuery,
                     _bilinear, to_forward, validate_params)
from .penalty import k_constant
from .vi import (FreeBoundary, ViSolution, extract_boundary, solve_vi_penalty,
                 solve_vi_projected)


def forward_performance(w, t: float, p: ModelParams):
    """Exponential forward performance ``U_t(w) = -exp(-gamma w + lam^2 t / 2)``."""
    return -np.exp(-p.gamma * np.asarray(w, dtype=float) + 0.5 * p.lam**2 * t)


def inverse_forward_performance(v, t: float, p: ModelParams):
    v = np.asarray(v, dtype=float)
    return (0.5 * p.lam**2 * t - np.log(-v)) / p.gamma


@dataclass(frozen=True)
class PriceModel:
    params: ModelParams
    vi: ViSolution
    boundary: FreeBoundary
    grad: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, p: ModelParams, grid: GridSpec | None = None, *,
              method: str = "penalty", schedule=None,
              contact_tol: float | None = None) -> "PriceModel":
        validate_params(p)
        grid = grid or GridSpec.centered(p)
        if method == "penalty":
            vi = solve_vi_penalty(grid, p, schedule)
        elif method == "projected":
            vi = solve_vi_projected(grid, p)
        else:
            raise ValueError(f"unknown method {method!r}")
        return cls.from_solution(p, vi, contact_tol)

    @classmethod
    def from_solution(cls, p: ModelParams, vi: ViSolution,
                      contact_tol: float | None = None) -> "PriceModel":
        u = vi.surface.values
        g = vi.grid
        grad = np.empty_like(u)
        grad[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2.0 * g.dx)
        grad[:, 0] = 0.0
        grad[:, -1] = math.exp(g.x_max)
        grad.setflags(write=False)
        return cls(p, vi, extract_boundary(vi, p, contact_tol), grad)

    @property
    def grid(self) -> GridSpec:
        return self.vi.grid

    @property
    def surface(self) -> Surface:
        return self.vi.surface

    def _locate(self, y: float, t: float) -> tuple[float, float]:
        if not y > 0:
            raise OutOfDomainError(f"y must be positive, got {y}")
        if not -1e-12 <= t <= self.params.T + 1e-12:
            raise OutOfDomainError(f"t={t} outside [0, {self.params.T}]")
        x, theta = to_forward(y, min(max(t, 0.0), self.params.T), self.params)
        g = self.grid
        if not (g.x_min - 1e-12 <= x <= g.x_max + 1e-12):
            raise OutOfDomainError(
                f"y={y:.6g} outside grid window [{math.exp(g.x_min):.6g}, {math.exp(g.x_max):.6g}]"
            )
        return x, theta

    def indifference_price(self, y: float, t: float) -> float:
        x, theta = self._locate(y, t)
        return self.surface.interpolate(x, theta)

    def value_function(self, q: ValueQuery) -> float:
        P = self.indifference_price(q.y, q.t)
        return float(forward_performance(q.w + P, q.t, self.params))

    def dprice_dy(self, y: float, t: float) -> float:
        """``dP/dy`` through ``y dP/dy = du/dx`` on the log grid."""
        x, theta = self._locate(y, t)
        return float(_bilinear(self.grad, self.grid, x, theta)) / y

    def hedge_ratio(self, y: float, t: float) -> float:
        """Optimal amount held in the traded asset, independent of wealth."""
        p = self.params
        x, theta = self._locate(y, t)
        ux = float(_bilinear(self.grad, self.grid, x, theta))
        return -(p.rho * p.c / p.sigma) * ux + p.lam / (p.sigma * p.gamma)

    def exercise_boundary(self, t: float) -> float:
        """Critical price ``y*(t) = exp(s(T - t))``; ``inf`` if censored by the window."""
        if not 0.0 <= t < self.params.T:
            raise OutOfDomainError(f"t={t} outside [0, T)")
        return math.exp(self.boundary.s_at(self.params.T - t))

    def boundary_censored(self, t: float) -> bool:
        return math.isinf(self.exercise_boundary(t))

    def bound_check(self) -> dict:
        """Margins of the price/gradient estimates on the grid (negative = violated)."""
        p, g = self.params, self.grid
        u = self.surface.values
        x = g.x
        th = g.theta[:, None]
        dpos = max(p.drift, 0.0)
        y = np.exp(x)
        upper = k_constant(p) * th + x**2 + y * np.exp(dpos * th) + 1.0
        dPdy = self.grad / y
        return {
            "price_lower": float(np.min(u - np.maximum(y - p.K, 0.0))),
            "price_upper": float(np.min(upper - u)),
            "dPdy_lower": float(np.min(dPdy[:, 1:-1])),
            "dPdy_upper": float(np.min(np.exp(dpos * th) - dPdy[:, 1:-1])),
        }
