"""Obstacle-problem solution u(x, theta) and its free boundary s(theta)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import GridSpec, ModelParams, Surface, ValidationError, payoff
from .penalty import DiscreteOperator, PenaltySettings, SolverError, solve_penalized

DEFAULT_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class ViSolution:
    surface: Surface
    exercise_mask: np.ndarray = field(repr=False)
    method: str
    contact_tol: float
    obstacle: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.surface.grid


@dataclass(frozen=True)
class FreeBoundary:
    """Exercise boundary in log space; ``censored[j]`` means no contact on row j."""

    theta_samples: np.ndarray
    s_values: np.ndarray
    x0: float
    censored: np.ndarray
    raw_values: np.ndarray = field(repr=False, default=None)

    def s_at(self, theta: float) -> float:
        """Boundary at ``theta`` by linear interpolation; ``inf`` where censored."""
        th, s = self.theta_samples, self.s_values
        if theta < 0 or theta > th[-1] + 1e-12:
            raise ValidationError(f"theta={theta} outside (0, {th[-1]}]")
        j = int(np.searchsorted(th, theta - 1e-12))
        j = min(j, th.size - 1)
        if self.censored[j]:
            return math.inf
        if theta <= th[0]:
            # between theta=0 (limit x0) and the first sample
            left = min(self.x0, s[0])
            return left + (s[0] - left) * theta / th[0]
        if j > 0 and theta < th[j]:
            w = (theta - th[j - 1]) / (th[j] - th[j - 1])
            return (1 - w) * s[j - 1] + w * s[j]
        return float(s[j])


def x0_limit(p: ModelParams) -> float:
    """Short-maturity limit of the exercise boundary in log space."""
    d = p.drift
    if d <= 0:
        return math.log(p.K)
    return max(math.log(p.K), math.log(2.0 * d / p.quad_coef))


def contact_tolerance(grid: GridSpec, eps_final: float = 0.0) -> float:
    return max(eps_final, 5.0 * grid.dx**2)


def _mask(u: np.ndarray, obstacle: np.ndarray, x: np.ndarray, K: float, tol: float) -> np.ndarray:
    mask = (u - obstacle) <= tol
    mask &= (x > math.log(K))[None, :]
    mask[0] = False
    return mask


def pde_residual(values: np.ndarray, grid: GridSpec, p: ModelParams,
                 claim_scale: float = 1.0) -> np.ndarray:
    """Implicit-Euler residual ``(u^j - u^{j-1})/dtheta - L u^j`` on rows 1..n."""
    op = DiscreteOperator(grid, p, grad_right=claim_scale * math.exp(grid.x_max))
    res = np.empty((grid.n_theta, grid.n_x))
    for j in range(1, grid.n_theta + 1):
        res[j - 1] = (values[j] - values[j - 1]) / grid.dtheta - op.apply(values[j])
    return res


def complementarity(values: np.ndarray, obstacle: np.ndarray, grid: GridSpec,
                    p: ModelParams, scale: float | None = None,
                    claim_scale: float = 1.0) -> np.ndarray:
    """Node-wise ``min(residual, u - obstacle)`` on rows 1..n.

    The PDE residual is divided by ``scale`` (default: the implicit diagonal
    ``1/dtheta + c^2/dx^2``) so both arguments are in units of ``u``.
    """
    if scale is None:
        scale = 1.0 / grid.dtheta + p.c**2 / grid.dx**2
    res = pde_residual(values, grid, p, claim_scale) / scale
    return np.minimum(res, values[1:] - obstacle[None, :])


def _finish(values: np.ndarray, grid: GridSpec, p: ModelParams, method: str,
            eps_final: float, diagnostics: dict, obstacle: np.ndarray,
            claim_scale: float) -> ViSolution:
    x = grid.x
    tol = contact_tolerance(grid, eps_final)
    mask = _mask(values, obstacle, x, p.K, tol)
    comp = complementarity(values, obstacle, grid, p, claim_scale=claim_scale)
    diagnostics["complementarity_max"] = float(np.max(np.abs(comp)))
    return ViSolution(Surface(grid, values), mask, method, tol, obstacle, diagnostics)


def solve_vi_penalty(grid: GridSpec, p: ModelParams,
                     schedule: list[tuple[float, float]] | None = None, *,
                     scale: float = 1.0, extrapolate: bool = False,
                     shape: str = "exponential") -> ViSolution:
    """Obstacle solution by epsilon-continuation of the penalized problem.

    ``schedule`` is a list of ``(epsilon, N)``. The returned surface is the
    last penalized solution, projected onto the obstacle with its first row
    reset to the exact payoff. ``extrapolate=True`` instead combines the last
    two members linearly in epsilon; that estimate is sharper at coarse
    epsilon but is not itself a discrete solution, so it can lose
    monotonicity in theta. ``scale`` multiplies the claim.
    """
    grid.check_against(p)
    n_default = max(abs(grid.x_min), abs(grid.x_max))
    if schedule is None:
        schedule = [(e, n_default) for e in DEFAULT_SCHEDULE]
    eps = [float(e) for e, _ in schedule]
    ns = [float(n) for _, n in schedule]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError("epsilon schedule must be strictly decreasing")
    if any(b < a for a, b in zip(ns, ns[1:])):
        raise ValidationError("truncation schedule must be non-decreasing")
    if ns[0] < n_default - 1e-12:
        raise ValidationError("grid must lie inside (-N, N) for every schedule entry")

    obstacle = scale * payoff(grid.x, p.K)
    surfaces, runs = [], []
    for e, n in zip(eps, ns):
        run = solve_penalized(PenaltySettings(e, n, shape=shape), grid, p, scale=scale)
        surfaces.append(run.surface.values)
        runs.append(run)
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(surfaces, surfaces[1:])]
    cauchy = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    u = surfaces[-1]
    if extrapolate and len(surfaces) >= 2:
        e1, e2 = eps[-2], eps[-1]
        u = surfaces[-1] + (surfaces[-1] - surfaces[-2]) * e2 / (e1 - e2)
    u = np.maximum(u, obstacle[None, :])
    u[0] = obstacle
    diagnostics = {
        "schedule": [[e, n] for e, n in zip(eps, ns)],
        "penalty_shape": shape,
        "successive_sup_diffs": diffs,
        "cauchy": cauchy,
        "newton_iterations": [r.newton_iterations for r in runs],
        "max_newton_residual": max(r.max_residual for r in runs),
        "worst_final_newton_ratio": max(r.worst_final_ratio for r in runs),
        "step_halvings": sum(r.substeps - grid.n_theta for r in runs),
        "bounds": runs[-1].bounds,
        "extrapolated": bool(extrapolate and len(surfaces) >= 2),
    }
    return _finish(u, grid, p, "penalty-continuation", eps[-1], diagnostics, obstacle, scale)


def solve_vi_projected(grid: GridSpec, p: ModelParams, *, scale: float = 1.0,
                       omega: float = 1.2, tol: float = 1e-14, max_sweeps: int = 2000) -> ViSolution:
    """Implicit Euler with projected red-black SOR on the same discrete operator."""
    grid.check_against(p)
    op = DiscreteOperator(grid, p, grad_right=scale * math.exp(grid.x_max))
    x = grid.x
    h, dt = grid.dx, grid.dtheta
    d, mu, a = op.diff, op.mu, op.a
    gl, gr = op.grad_left, op.g_right
    obstacle = scale * payoff(x, p.K)
    n = grid.n_x
    diag = 1.0 / dt + 2.0 * d / h**2
    red = np.arange(0, n, 2)
    black = np.arange(1, n, 2)

    def relax(u, old, idx):
        um = np.where(idx > 0, u[np.maximum(idx - 1, 0)], 0.0)
        up = np.where(idx < n - 1, u[np.minimum(idx + 1, n - 1)], 0.0)
        pg = (up - um) / (2.0 * h)
        nb = d * (up + um) / h**2
        left = idx == 0
        right = idx == n - 1
        pg = np.where(left, gl, np.where(right, gr, pg))
        nb = np.where(left, 2.0 * d * (u[1] - h * gl) / h**2, nb)
        nb = np.where(right, 2.0 * d * (u[n - 2] + h * gr) / h**2, nb)
        gs = (old[idx] / dt + nb + mu * pg - 0.5 * a * pg * pg) / diag
        cand = u[idx] + omega * (gs - u[idx])
        new = np.maximum(obstacle[idx], cand)
        change = float(np.max(np.abs(new - u[idx])))
        u[idx] = new
        return change

    out = np.empty((grid.n_theta + 1, n))
    out[0] = obstacle
    u = obstacle.copy()
    sweeps_total, worst = 0, 0
    for j in range(1, grid.n_theta + 1):
        old = out[j - 1]
        scale_u = max(1.0, float(np.max(np.abs(old))))
        for k in range(max_sweeps):
            ch = max(relax(u, old, red), relax(u, old, black))
            if ch <= tol * scale_u:
                break
        else:
            raise SolverError(f"projected relaxation did not converge on row {j}")
        sweeps_total += k + 1
        worst = max(worst, k + 1)
        out[j] = u
    diagnostics = {"sweeps_total": sweeps_total, "max_sweeps_per_row": worst, "omega": omega}
    return _finish(out, grid, p, "projected-relaxation", 0.0, diagnostics, obstacle, scale)


def extract_boundary(sol: ViSolution, p: ModelParams, tol: float | None = None) -> FreeBoundary:
    """Free boundary from the exercise mask, refined by linear interpolation.

    On each row the boundary is the point where ``u - obstacle`` falls to the
    contact tolerance, interpolated between the last continuation node and
    the first exercise node; rows without contact are right-censored.
    ``tol`` overrides the solution's contact tolerance (the default one
    smears the contact set by about ``sqrt(5) dx`` near the boundary).
    """
    g = sol.grid
    x = g.x
    u = sol.surface.values
    gap = u - sol.obstacle[None, :]
    if tol is None:
        tol, mask = sol.contact_tol, sol.exercise_mask
    else:
        mask = _mask(u, sol.obstacle, x, p.K, tol)
    n_rows = g.n_theta
    raw = np.full(n_rows, np.nan)
    censored = np.zeros(n_rows, dtype=bool)
    for j in range(1, g.n_theta + 1):
        hits = np.flatnonzero(mask[j])
        if hits.size == 0:
            censored[j - 1] = True
            continue
        i = hits[0]
        if i == 0:
            raw[j - 1] = x[0]
            continue
        g0, g1 = gap[j, i - 1], gap[j, i]
        if g0 > tol and g0 != g1:
            w = (g0 - tol) / (g0 - g1)
            raw[j - 1] = x[i - 1] + w * (x[i] - x[i - 1])
        else:
            raw[j - 1] = x[i]
    # censoring propagates: the boundary only moves right with theta
    if censored.any():
        first = int(np.argmax(censored))
        censored[first:] = True
        raw[first:] = np.nan
    rect = raw.copy()
    ok = ~censored
    rect[ok] = np.maximum.accumulate(raw[ok])
    return FreeBoundary(g.theta[1:], rect, x0_limit(p), censored, raw)


def relative_sup_diff(a: np.ndarray, b: np.ndarray) -> float:
    """``||a - b||_inf / ||b||_inf``."""
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
