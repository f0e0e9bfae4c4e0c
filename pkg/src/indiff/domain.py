"""Model constants, coordinate transforms and grid containers.

The pricing problem is posed for a call on a non-traded asset ``Y`` whose
log-price is ``x = ln y``; solvers march forward in time-to-maturity
``theta = T - t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Raised when parameters or grids violate their invariants."""


class OutOfDomainError(ValueError):
    """Raised for queries outside the numerical window (no extrapolation)."""


@dataclass(frozen=True)
class ModelParams:
    b: float = 0.05
    c: float = 0.3
    rho: float = 0.5
    lam: float = 0.4
    sigma: float = 0.25
    gamma: float = 1.0
    K: float = 1.0
    T: float = 1.0

    @property
    def drift(self) -> float:
        """Drift of Y under the minimal martingale measure, ``b - rho*c*lam``."""
        return self.b - self.rho * self.c * self.lam

    @property
    def quad_coef(self) -> float:
        """Coefficient ``gamma (1 - rho^2) c^2`` of the squared-gradient term."""
        return self.gamma * (1.0 - self.rho**2) * self.c**2

    def replace(self, **changes) -> "ModelParams":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ModelParams(**d)

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


def validate_params(p: ModelParams) -> ModelParams:
    for name in ("b", "c", "rho", "lam", "sigma", "gamma", "K", "T"):
        v = getattr(p, name)
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite, got {v!r}")
    if p.rho >= 1.0:
        raise ValidationError(
            f"rho={p.rho}: complete market excluded (rho must lie in [0, 1))"
        )
    if p.rho < 0.0:
        raise ValidationError(f"rho={p.rho}: negative correlation not supported")
    for name in ("c", "sigma", "gamma", "K", "T"):
        if getattr(p, name) <= 0.0:
            raise ValidationError(f"{name} must be strictly positive, got {getattr(p, name)}")
    return p


def to_forward(y: float, t: float, p: ModelParams) -> tuple[float, float]:
    if not y > 0.0:
        raise ValidationError(f"y must be positive, got {y}")
    if not 0.0 <= t <= p.T:
        raise ValidationError(f"t={t} outside [0, {p.T}]")
    return math.log(y), p.T - t


def from_forward(x: float, theta: float, p: ModelParams) -> tuple[float, float]:
    if not 0.0 <= theta <= p.T:
        raise ValidationError(f"theta={theta} outside [0, {p.T}]")
    return math.exp(x), p.T - theta


def payoff(x, K: float = 1.0):
    """Call payoff ``(e^x - K)^+`` in log coordinates; accepts scalars or arrays."""
    return np.maximum(np.exp(x) - K, 0.0)


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_x: int
    n_theta: int
    theta_max: float

    def __post_init__(self):
        if self.n_x < 3:
            raise ValidationError("n_x must be at least 3")
        if self.n_theta < 1:
            raise ValidationError("n_theta must be at least 1")
        if not self.x_min < self.x_max:
            raise ValidationError("x_min must be below x_max")
        if self.theta_max <= 0:
            raise ValidationError("theta_max must be positive")

    @classmethod
    def centered(cls, p: ModelParams, half_width: float = 4.0, n_x: int = 401,
                 n_theta: int = 400) -> "GridSpec":
        """Window ``[ln K - half_width, ln K + half_width]`` with ln K on a node when n_x is odd."""
        lk = math.log(p.K)
        return cls(lk - half_width, lk + half_width, n_x, n_theta, p.T)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dtheta(self) -> float:
        return self.theta_max / self.n_theta

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(0.0, self.theta_max, self.n_theta + 1)

    def check_against(self, p: ModelParams) -> None:
        lk = math.log(p.K)
        if not self.x_min < lk < self.x_max:
            raise ValidationError(
                f"ln K={lk:.6g} must lie strictly inside [{self.x_min}, {self.x_max}]"
            )
        if abs(self.theta_max - p.T) > 1e-12 * max(1.0, p.T):
            raise ValidationError(f"theta_max={self.theta_max} must equal T={p.T}")

    def kink_index(self, K: float) -> int:
        """Index of the node nearest ln K."""
        return int(round((math.log(K) - self.x_min) / self.dx))

    def snapped(self, K: float) -> "GridSpec":
        """Shift the window by less than half a cell so that ln K sits on a node."""
        j = self.kink_index(K)
        shift = math.log(K) - (self.x_min + j * self.dx)
        if shift == 0.0:
            return self
        return GridSpec(self.x_min + shift, self.x_max + shift, self.n_x,
                        self.n_theta, self.theta_max)

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class Surface:
    """A field on the (theta, x) lattice; row ``j`` holds values at ``theta_j``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_theta + 1, self.grid.n_x):
            raise ValidationError(
                f"surface shape {v.shape} does not match grid "
                f"({self.grid.n_theta + 1}, {self.grid.n_x})"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("surface contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def interpolate(self, x: float, theta: float) -> float:
        """Bilinear interpolation; raises OutOfDomainError outside the window."""
        g = self.grid
        tol = 1e-12
        if not (g.x_min - tol <= x <= g.x_max + tol):
            raise OutOfDomainError(f"x={x:.6g} outside [{g.x_min:.6g}, {g.x_max:.6g}]")
        if not (-tol <= theta <= g.theta_max + tol):
            raise OutOfDomainError(f"theta={theta:.6g} outside [0, {g.theta_max:.6g}]")
        return float(_bilinear(self.values, g, x, theta))


def _bilinear(values: np.ndarray, g: GridSpec, x: float, theta: float) -> float:
    fx = min(max((x - g.x_min) / g.dx, 0.0), g.n_x - 1.0)
    ft = min(max(theta / g.dtheta, 0.0), float(g.n_theta))
    # snap near-node queries so nodal values come back exactly
    if abs(fx - round(fx)) < 1e-9:
        fx = float(round(fx))
    if abs(ft - round(ft)) < 1e-9:
        ft = float(round(ft))
    i = min(int(fx), g.n_x - 2)
    j = min(int(ft), g.n_theta - 1)
    ax, at = fx - i, ft - j
    v00, v01 = values[j, i], values[j, i + 1]
    v10, v11 = values[j + 1, i], values[j + 1, i + 1]
    return (1 - at) * ((1 - ax) * v00 + ax * v01) + at * ((1 - ax) * v10 + ax * v11)


@dataclass(frozen=True)
class ValueQuery:
    w: float
    y: float
    t: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValidationError(f"y must be positive, got {self.y}")
        if self.t < 0:
            raise ValidationError(f"t must be non-negative, got {self.t}")


REFERENCE_PARAMS = ModelParams()
