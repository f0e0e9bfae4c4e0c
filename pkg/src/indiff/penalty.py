"""Penalized, truncated forward problem solved by implicit Euler + Newton.

Unknown ``u(x, theta)`` on a uniform log-price window solves

    u_theta - L u + beta_eps(u - pi_eps(e^x - K)) = 0,
    u_x(x_min) = 0,  u_x(x_max) = e^{x_max},
    u(x, 0) = pi_eps(e^x - K),

with ``L u = c^2/2 u_xx + (b - rho c lam - c^2/2) u_x - gamma (1-rho^2) c^2/2 (u_x)^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .domain import GridSpec, ModelParams, Surface, ValidationError, payoff

# exponent at which beta_eps switches to its quadratic continuation
_BETA_EXP_CAP = 40.0


class SolverError(RuntimeError):
    """Numerical failure (non-convergence, non-finite iterate)."""


class BoundViolation(SolverError):
    """A discrete a-priori estimate failed beyond the allowed slack."""


def c0_for_truncation(N: float, p: ModelParams, scale: float = 1.0) -> float:
    """Penalty floor ``rho c lam e^N + gamma (1-rho^2) c^2 e^{2N} / 2``.

    For a claim scaled by ``n`` the same subsolution argument needs
    ``n rho c lam e^N + n^2 gamma (1-rho^2) c^2 e^{2N} / 2``.
    """
    if 2.0 * N > 700.0:
        raise ValidationError(f"truncation N={N} overflows e^(2N)")
    return (scale * p.rho * p.c * p.lam * math.exp(N)
            + 0.5 * scale**2 * p.quad_coef * math.exp(2.0 * N))


def k_constant(p: ModelParams) -> float:
    """Smallest admissible ``k`` in the upper barrier ``k theta + x^2 + e^{x + d^+ theta} + 1``."""
    a = p.quad_coef
    mu = p.drift - 0.5 * p.c**2
    first = p.c**2 + mu**2 / (2.0 * a)
    second = p.c**2 + (a * math.exp(max(p.drift, 0.0) * p.T) - mu) ** 2 / (2.0 * a)
    return max(first, second)


@dataclass(frozen=True)
class PenaltySettings:
    epsilon: float
    n_trunc: float
    c0: float | None = None
    newton_tol: float = 1e-13
    newton_max_iter: int = 100
    shape: str = "exponential"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if not self.n_trunc > 0:
            raise ValidationError("n_trunc must be positive")
        if self.c0 is not None and not self.c0 > 0:
            raise ValidationError("c0 must be positive")
        if self.shape not in PENALTY_KINDS:
            raise ValidationError(f"unknown penalty shape {self.shape!r}")

    def penalty_floor(self, p: ModelParams, scale: float = 1.0) -> float:
        return self.c0 if self.c0 is not None else c0_for_truncation(self.n_trunc, p, scale)


@dataclass(frozen=True)
class PenaltyShape:
    """Penalty family ``beta_eps`` with ``beta(0) = -C0``.

    ``exponential``: ``-C0 exp(-t/eps)``, continued quadratically far below zero.
    ``cubic``: ``-C0 ((eps - t)/eps)^3`` for ``t < eps``, zero beyond (C^2 at ``eps``).
    """

    c0: float
    epsilon: float
    kind: str = "exponential"

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValidationError(f"unknown penalty shape {self.kind!r}")

    def __call__(self, t):
        return beta_eps(t, self.c0, self.epsilon, self.kind)

    def check(self, samples: np.ndarray | None = None) -> bool:
        """Discrete check of beta <= 0, beta' >= 0, beta'' <= 0, beta(0) = -C0."""
        if samples is None:
            samples = np.linspace(-30 * self.epsilon, 30 * self.epsilon, 2001)
        v, d = self(samples)
        dd = np.diff(d)
        v0, _ = self(np.array([0.0]))
        return bool(
            np.all(v <= 0) and np.all(d >= 0) and np.all(dd <= 1e-12 * np.abs(d).max())
            and math.isclose(v0[0], -self.c0, rel_tol=1e-15)
        )


PENALTY_KINDS = ("exponential", "cubic")


def beta_eps(t, c0: float, epsilon: float, kind: str = "exponential"):
    """Penalty function and its derivative at ``t`` (array or scalar)."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        v, d = beta_eps(t.reshape(1), c0, epsilon, kind)
        return v[0], d[0]
    if kind == "cubic":
        r = np.maximum(epsilon - t, 0.0) / epsilon
        return -c0 * r**3, (3.0 * c0 / epsilon) * r**2
    z = -t / epsilon
    zc = np.minimum(z, _BETA_EXP_CAP)
    e = np.exp(zc)
    val = -c0 * e
    der = (c0 / epsilon) * e
    far = z > _BETA_EXP_CAP
    if np.any(far):
        # C^2 quadratic continuation keeps the penalty concave and finite
        s = t[far] + _BETA_EXP_CAP * epsilon
        e0 = math.exp(_BETA_EXP_CAP)
        v0, d0, dd0 = -c0 * e0, c0 / epsilon * e0, -c0 / epsilon**2 * e0
        val[far] = v0 + d0 * s + 0.5 * dd0 * s * s
        der[far] = d0 + dd0 * s
    return val, der


def pi_eps(t, epsilon: float):
    """C^1 convex smoothing of ``t^+``: quadratic ``(t+eps)^2/(4 eps)`` on ``|t| < eps``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= epsilon, t, 0.0)
    mid = np.abs(t) < epsilon
    out = np.where(mid, (t + epsilon) ** 2 / (4.0 * epsilon), out)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# discrete operator shared by the penalty and projected schemes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteOperator:
    """Central-difference ``L`` with Neumann data folded in via ghost nodes."""

    grid: GridSpec
    params: ModelParams
    grad_left: float = 0.0
    grad_right: float | None = None

    @property
    def diff(self) -> float:
        return 0.5 * self.params.c**2

    @property
    def mu(self) -> float:
        return self.params.drift - 0.5 * self.params.c**2

    @property
    def a(self) -> float:
        return self.params.quad_coef

    @property
    def g_right(self) -> float:
        return math.exp(self.grid.x_max) if self.grad_right is None else self.grad_right

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Centered ``u_x`` at every node; boundary nodes carry the Neumann data."""
        h = self.grid.dx
        p = np.empty_like(u)
        p[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        p[0] = self.grad_left
        p[-1] = self.g_right
        return p

    def apply(self, u: np.ndarray) -> np.ndarray:
        h = self.grid.dx
        d, mu, a = self.diff, self.mu, self.a
        p = self.gradient(u)
        lap = np.empty_like(u)
        lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        lap[0] = 2.0 * (u[1] - u[0]) - 2.0 * h * self.grad_left
        lap[-1] = 2.0 * (u[-2] - u[-1]) + 2.0 * h * self.g_right
        return d * lap / h**2 + mu * p - 0.5 * a * p * p

    def jacobian_bands(self, u: np.ndarray) -> np.ndarray:
        """Banded (1,1) Jacobian of ``-L`` at ``u``, layout for ``solve_banded``."""
        h = self.grid.dx
        d, mu, a = self.diff, self.mu, self.a
        n = u.size
        p = self.gradient(u)
        eff = mu - a * p
        ab = np.zeros((3, n))
        ab[1, :] = 2.0 * d / h**2
        # ab[0, j] holds J[j-1, j]; ab[2, j] holds J[j+1, j]
        ab[0, 2:] = -d / h**2 - eff[1:-1] / (2.0 * h)
        ab[2, :-2] = -d / h**2 + eff[1:-1] / (2.0 * h)
        ab[0, 1] = -2.0 * d / h**2
        ab[2, -2] = -2.0 * d / h**2
        return ab


@dataclass
class StepStats:
    iterations: int
    residual: float
    ratio: float


def step_penalized(prev_row: np.ndarray, dtheta: float, settings: PenaltySettings,
                   p: ModelParams, grid: GridSpec, *, op: DiscreteOperator | None = None,
                   obstacle: np.ndarray | None = None, c0: float | None = None,
                   guess: np.ndarray | None = None) -> tuple[np.ndarray, StepStats]:
    """One implicit-Euler step of the penalized equation, solved by Newton."""
    op = op or DiscreteOperator(grid, p)
    if obstacle is None:
        obstacle = pi_eps(np.exp(grid.x) - p.K, settings.epsilon)
    c0 = settings.penalty_floor(p) if c0 is None else c0
    eps = settings.epsilon
    prev_row = np.asarray(prev_row, dtype=float)
    if not np.all(np.isfinite(prev_row)):
        raise SolverError("non-finite previous row")

    def residual(u):
        bv, bd = beta_eps(u - obstacle, c0, eps, settings.shape)
        return (u - prev_row) / dtheta - op.apply(u) + bv, bd

    u = prev_row.copy() if guess is None else np.asarray(guess, dtype=float).copy()
    # residual scaled by the Jacobian diagonal, i.e. measured in units of u
    base_diag = 1.0 / dtheta + 2.0 * op.diff / grid.dx**2
    F, bd = residual(u)
    rn = float(np.max(np.abs(F) / (base_diag + bd)))
    fn = float(np.max(np.abs(F)))
    history = [rn]
    for it in range(1, settings.newton_max_iter + 1):
        if rn <= settings.newton_tol:
            break
        ab = op.jacobian_bands(u)
        ab[1] += 1.0 / dtheta + bd
        delta = solve_banded((1, 1), ab, -F, check_finite=False)
        # backtracking on the unscaled residual; the scaled one may rise
        # transiently while iterates climb the flat tail of beta_eps
        lam = 1.0
        while True:
            trial = u + lam * delta
            Ft, bdt = residual(trial)
            ft = float(np.max(np.abs(Ft)))
            rt = float(np.max(np.abs(Ft) / (base_diag + bdt)))
            if np.isfinite(ft) and (ft <= (1.0 - 1e-4 * lam) * fn or rt < rn or lam < 1.0 / 64):
                break
            lam *= 0.5
        if not np.isfinite(ft):
            raise SolverError("non-finite Newton iterate")
        u, F, bd, fn, rn = trial, Ft, bdt, ft, rt
        history.append(rn)
    if rn > settings.newton_tol:
        raise SolverError(
            f"Newton did not converge: residual {rn:.3e} after {settings.newton_max_iter} iterations"
        )
    ratio = history[-1] / history[-2] if len(history) >= 2 and history[-2] > 0 else 0.0
    return u, StepStats(len(history) - 1, rn, ratio)


@dataclass
class PenaltyRun:
    surface: Surface
    epsilon: float
    c0: float
    newton_iterations: int
    max_residual: float
    substeps: int
    obstacle: np.ndarray = field(repr=False)
    bounds: dict = field(default_factory=dict)
    worst_final_ratio: float = 0.0


def bound_report(values: np.ndarray, grid: GridSpec, p: ModelParams,
                 lower: np.ndarray) -> dict:
    """Measured margins of the discrete a-priori estimates (negative = violation).

    ``lower`` is the obstacle row the solution must dominate.
    """
    x = grid.x
    th = grid.theta[:, None]
    dpos = max(p.drift, 0.0)
    k = k_constant(p)
    upper = k * th + x**2 + np.exp(x + dpos * th) + 1.0
    grad = (values[:, 2:] - values[:, :-2]) / (2.0 * grid.dx)
    grad_cap = np.exp(x[1:-1] + dpos * th)
    dtheta = np.diff(values, axis=0) / grid.dtheta
    return {
        "lower_margin": float(np.min(values - lower)),
        "upper_margin": float(np.min(upper - values)),
        "grad_lower_margin": float(np.min(grad)),
        "grad_upper_margin": float(np.min(grad_cap - grad)),
        "dtheta_min": float(np.min(dtheta)),
        "empirical_envelope": float(np.max(values - np.exp(x + dpos * th))),
    }


def check_bounds(report: dict, slack: float) -> list[str]:
    failed = []
    for key in ("lower_margin", "upper_margin", "grad_lower_margin",
                "grad_upper_margin", "dtheta_min"):
        if key in report and report[key] < -slack:
            failed.append(f"{key}={report[key]:.3e} < -{slack:.3e}")
    return failed


def solve_penalized(settings: PenaltySettings, grid: GridSpec, p: ModelParams, *,
                    scale: float = 1.0, check: bool = True, max_halvings: int = 6) -> PenaltyRun:
    """March the penalized problem over every row of ``grid``.

    ``scale`` multiplies the claim: obstacle and initial datum become
    ``pi_eps(scale (e^x - K))`` and the right Neumann datum ``scale e^{x_max}``.
    The a-priori barrier checks apply to the unscaled claim only.
    """
    grid.check_against(p)
    if settings.n_trunc < max(abs(grid.x_min), abs(grid.x_max)) - 1e-12:
        raise ValidationError("grid extends beyond the truncation window (-N, N)")
    op = DiscreteOperator(grid, p, grad_right=scale * math.exp(grid.x_max))
    obstacle = pi_eps(scale * (np.exp(grid.x) - p.K), settings.epsilon)
    row = obstacle.copy()
    c0 = settings.penalty_floor(p, scale)
    out = np.empty((grid.n_theta + 1, grid.n_x))
    out[0] = row
    total_iter, worst, substeps, ratio = 0, 0.0, 0, 0.0
    for j in range(1, grid.n_theta + 1):
        row, st, n_sub = _advance(row, grid.dtheta, settings, p, grid, op,
                                  obstacle, c0, max_halvings)
        total_iter += st.iterations
        worst = max(worst, st.residual)
        ratio = max(ratio, st.ratio)
        substeps += n_sub
        out[j] = row
    surface = Surface(grid, out)
    run = PenaltyRun(surface, settings.epsilon, c0, total_iter, worst, substeps, obstacle,
                     worst_final_ratio=ratio)
    if check:
        slack = 10.0 * (grid.dx + grid.dtheta)
        if scale == 1.0:
            run.bounds = bound_report(out, grid, p, obstacle)
        else:
            run.bounds = {
                "lower_margin": float(np.min(out - obstacle)),
                "dtheta_min": float(np.min(np.diff(out, axis=0)) / grid.dtheta),
            }
        failed = check_bounds(run.bounds, slack)
        if failed:
            raise BoundViolation("; ".join(failed))
    return run


def _advance(row, dt, settings, p, grid, op, obstacle, c0, halvings_left):
    """Step by ``dt``, halving the step on Newton failure."""
    try:
        u, st = step_penalized(row, dt, settings, p, grid, op=op, obstacle=obstacle, c0=c0)
        return u, st, 1
    except SolverError:
        if halvings_left == 0:
            raise
    u1, st1, s1 = _advance(row, dt / 2, settings, p, grid, op, obstacle, c0, halvings_left - 1)
    u2, st2, s2 = _advance(u1, dt / 2, settings, p, grid, op, obstacle, c0, halvings_left - 1)
    st = StepStats(st1.iterations + st2.iterations, max(st1.residual, st2.residual),
                   max(st1.ratio, st2.ratio))
    return u2, st, s1 + s2
