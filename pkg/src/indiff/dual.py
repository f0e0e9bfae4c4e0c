"""Monte-Carlo check of the entropy-penalized dual representation of P.

For a control ``phi`` the asset is simulated directly under the tilted
dynamics

    dY = (b - c rho lam - c sqrt(1-rho^2) phi) Y dt + c Y dB,

and a stopping rule ``tau`` is applied. The dual objective is
``E[g(Y_tau)] + (1/gamma) E[1/2 int_0^tau phi^2 dt]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import ModelParams, ValidationError


@dataclass(frozen=True)
class DualControl:
    """Piecewise-constant ``phi`` on (log-price bucket, time bucket) cells.

    ``x_edges`` / ``t_edges`` are interior bucket edges; values outside the
    outermost edges extend the boundary buckets.
    """

    x_edges: np.ndarray
    t_edges: np.ndarray
    values: np.ndarray = field(repr=False)
    description: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.t_edges) + 1, len(self.x_edges) + 1):
            raise ValidationError("control table shape does not match its buckets")
        if not np.all(np.isfinite(v)):
            raise ValidationError("control values must be finite")

    @classmethod
    def constant(cls, m: float) -> "DualControl":
        return cls(np.empty(0), np.empty(0), np.array([[float(m)]]), f"constant {m}")

    @classmethod
    def plug_in(cls, model) -> "DualControl":
        """``phi* = gamma c sqrt(1-rho^2) y dP/dy`` on the pricing grid cells.

        The maximizer of ``c sqrt(1-rho^2) y phi P_y - phi^2/(2 gamma)``.
        """
        p, g = model.params, model.grid
        x = g.x
        t_rows = p.T - g.theta  # row j sits at calendar time T - theta_j
        order = np.argsort(t_rows)
        t_sorted = t_rows[order]
        phi = p.gamma * p.c * math.sqrt(1.0 - p.rho**2) * np.asarray(model.grad)[order]
        x_edges = 0.5 * (x[1:] + x[:-1])
        t_edges = 0.5 * (t_sorted[1:] + t_sorted[:-1])
        return cls(x_edges, t_edges, phi, "plug-in from price gradient")

    def __call__(self, log_y: np.ndarray, t: float) -> np.ndarray:
        jt = int(np.searchsorted(self.t_edges, t, side="right"))
        row = self.values[jt]
        if row.size == 1:
            return np.full(np.shape(log_y), row[0])
        ix = np.searchsorted(self.x_edges, log_y, side="right")
        return row[ix]


@dataclass(frozen=True)
class MCSettings:
    n_paths: int = 100_000
    n_steps: int = 400
    seed: int = 12345
    batch_size: int = 10_000

    def __post_init__(self):
        if self.n_paths < 2 or self.n_steps < 1 or self.batch_size < 1:
            raise ValidationError("invalid Monte-Carlo settings")


@dataclass(frozen=True)
class StoppingRule:
    """Exercise at the first grid time ``t_k`` with ``Y >= thresholds[k]``; always at T."""

    thresholds: np.ndarray
    name: str = ""

    @classmethod
    def immediate(cls, n_steps: int) -> "StoppingRule":
        return cls(np.zeros(n_steps + 1), "immediate")

    @classmethod
    def at_maturity(cls, n_steps: int) -> "StoppingRule":
        return cls(np.full(n_steps + 1, np.inf), "maturity")

    @classmethod
    def from_boundary(cls, model, n_steps: int) -> "StoppingRule":
        T = model.params.T
        ts = np.linspace(0.0, T, n_steps + 1)
        th = np.array([model.exercise_boundary(t) for t in ts[:-1]] + [0.0])
        return cls(th, "exercise boundary")


@dataclass(frozen=True)
class DualEstimate:
    value: float
    std_error: float
    n_paths: int
    payoff_term: float
    entropy_term: float
    mean_tau: float


def simulate_y_under_control(y0: float, phi: DualControl, p: ModelParams, n_paths: int,
                             n_steps: int, seed) -> np.ndarray:
    """Log-Euler paths of ``Y^phi``, shape ``(n_paths, n_steps + 1)``.

    Exact in distribution when ``phi`` is constant over each step.
    """
    if not y0 > 0:
        raise ValidationError("y0 must be positive")
    if n_steps < 1:
        raise ValidationError("n_steps must be at least 1")
    rng = np.random.default_rng(seed)
    dt = p.T / n_steps
    sq = math.sqrt(dt)
    tilt = p.c * math.sqrt(1.0 - p.rho**2)
    base = p.b - p.c * p.rho * p.lam - 0.5 * p.c**2
    logy = np.empty((n_paths, n_steps + 1))
    logy[:, 0] = math.log(y0)
    for k in range(n_steps):
        f = phi(logy[:, k], k * dt)
        z = rng.standard_normal(n_paths)
        logy[:, k + 1] = logy[:, k] + (base - tilt * f) * dt + p.c * sq * z
    return np.exp(logy)


def _stop_index(paths: np.ndarray, rule: StoppingRule) -> np.ndarray:
    n_steps = paths.shape[1] - 1
    if rule.thresholds.shape != (n_steps + 1,):
        raise ValidationError("stopping rule does not match the time grid")
    hit = paths >= rule.thresholds[None, :]
    hit[:, -1] = True
    return np.argmax(hit, axis=1)


def entropy_penalty(phi: DualControl, paths: np.ndarray, rule: StoppingRule,
                    p: ModelParams) -> float:
    """MC mean of ``1/2 int_0^tau phi^2 dt`` with left-point steps."""
    return float(np.mean(_entropy_per_path(phi, paths, rule, p)))


def _entropy_per_path(phi, paths, rule, p):
    n_steps = paths.shape[1] - 1
    dt = p.T / n_steps
    tau = _stop_index(paths, rule)
    logy = np.log(paths)
    acc = np.zeros(paths.shape[0])
    for k in range(n_steps):
        alive = k < tau
        if not alive.any():
            break
        f = phi(logy[:, k], k * dt)
        acc += np.where(alive, 0.5 * f * f * dt, 0.0)
    return acc


def dual_value(y0: float, phi: DualControl, rule: StoppingRule, p: ModelParams,
               mc: MCSettings = MCSettings()) -> DualEstimate:
    """``E[g(Y_tau)] + (1/gamma) E[1/2 int_0^tau phi^2]`` with its standard error.

    Paths are generated in batches from independent child seeds, so the
    result depends only on ``(seed, n_paths, batch_size)``.
    """
    n_batches = -(-mc.n_paths // mc.batch_size)
    children = np.random.SeedSequence(mc.seed).spawn(n_batches)
    dt = p.T / mc.n_steps
    totals, pays, ents, taus = [], [], [], []
    remaining = mc.n_paths
    for child in children:
        n = min(mc.batch_size, remaining)
        remaining -= n
        paths = simulate_y_under_control(y0, phi, p, n, mc.n_steps, child)
        tau = _stop_index(paths, rule)
        pay = np.maximum(paths[np.arange(n), tau] - p.K, 0.0)
        ent = _entropy_per_path(phi, paths, rule, p)
        totals.append(pay + ent / p.gamma)
        pays.append(pay)
        ents.append(ent)
        taus.append(tau * dt)
    tot = np.concatenate(totals)
    return DualEstimate(
        value=float(tot.mean()),
        std_error=float(tot.std(ddof=1) / math.sqrt(tot.size)),
        n_paths=int(tot.size),
        payoff_term=float(np.concatenate(pays).mean()),
        entropy_term=float(np.concatenate(ents).mean()),
        mean_tau=float(np.concatenate(taus).mean()),
    )
