"""Run configuration: flat ``section.key=value`` text or nested JSON.

Lists are comma-separated in the text form. Numbers are written with
``repr`` so that a dump/parse round trip is lossless.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .domain import GridSpec, ModelParams, ValidationError, validate_params
from .vi import DEFAULT_SCHEDULE


@dataclass(frozen=True)
class GridConfig:
    half_width: float = 4.0
    n_x: int = 401
    n_theta: int = 400


@dataclass(frozen=True)
class PenaltyConfig:
    epsilons: tuple[float, ...] = DEFAULT_SCHEDULE
    shape: str = "exponential"
    method: str = "penalty"
    contact_tol: float = 0.0  # 0 keeps the default max(eps_final, 5 dx^2)


@dataclass(frozen=True)
class QueryConfig:
    y: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
    t: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ESOConfig:
    alpha: float = 0.1
    t_v: float = 0.25


@dataclass(frozen=True)
class MCConfig:
    y0: float = 1.0
    n_paths: int = 100_000
    n_steps: int = 400
    seed: int = 12345
    batch_size: int = 10_000


@dataclass(frozen=True)
class SweepConfig:
    param: str = "gamma"
    values: tuple[float, ...] = (0.5, 1.0, 2.0)
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    grid: GridConfig = field(default_factory=GridConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    query: QueryConfig = field(default_factory=QueryConfig)
    eso: ESOConfig = field(default_factory=ESOConfig)
    mc: MCConfig = field(default_factory=MCConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def grid_spec(self) -> GridSpec:
        return GridSpec.centered(self.model, self.grid.half_width, self.grid.n_x,
                                 self.grid.n_theta)

    def schedule(self) -> list[tuple[float, float]]:
        g = self.grid_spec()
        n = max(abs(g.x_min), abs(g.x_max))
        return [(e, n) for e in self.penalty.epsilons]

    def to_dict(self) -> dict:
        return {s.name: _section_dict(getattr(self, s.name)) for s in dataclasses.fields(self)}

    def to_text(self) -> str:
        lines = []
        for sec, body in self.to_dict().items():
            for k, v in body.items():
                lines.append(f"{sec}.{k}={_fmt(v)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _section_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(e) for e in v)
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(kind, raw, key: str):
    try:
        if kind is float:
            out = float(raw)
            if not math.isfinite(out):
                raise ValueError("non-finite")
            return out
        if kind is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError("not an integer")
            return int(raw)
        if kind is str:
            return str(raw)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{key}: cannot parse {raw!r} ({e})") from None
    # tuple of floats
    if isinstance(raw, str):
        items = [s for s in (t.strip() for t in raw.split(",")) if s]
    else:
        items = list(raw)
    if not items:
        raise ValidationError(f"{key}: empty list")
    return tuple(_coerce(float, s, key) for s in items)


_KINDS = {"float": float, "int": int, "str": str}


def _field_kind(f) -> type:
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    return _KINDS.get(t, tuple)


def from_dict(data: dict) -> RunConfig:
    sections = {}
    top = {f.name: f for f in dataclasses.fields(RunConfig)}
    for name, body in data.items():
        if name not in top:
            raise ValidationError(f"unknown config section {name!r}")
        if not isinstance(body, dict):
            raise ValidationError(f"section {name!r} must be a mapping")
        cls = type(top[name].default_factory())
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for k, v in body.items():
            if k not in known:
                raise ValidationError(f"unknown key {name}.{k}")
            kwargs[k] = _coerce(_field_kind(known[k]), v, f"{name}.{k}")
        sections[name] = cls(**kwargs)
    cfg = RunConfig(**sections)
    validate_config(cfg)
    return cfg


def parse_text(text: str) -> RunConfig:
    data: dict[str, dict] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {n}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ValidationError(f"line {n}: key {key!r} must look like section.name")
        sec, name = key.split(".")
        if name in data.setdefault(sec, {}):
            raise ValidationError(f"line {n}: duplicate key {key}")
        data[sec][name] = val
    return from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"invalid JSON config: {e}") from None
        return from_dict(data)
    return parse_text(text)


def validate_config(cfg: RunConfig) -> None:
    validate_params(cfg.model)
    g = cfg.grid
    if g.half_width <= 0 or g.n_x < 3 or g.n_theta < 1:
        raise ValidationError("grid needs half_width > 0, n_x >= 3, n_theta >= 1")
    if cfg.penalty.method not in ("penalty", "projected"):
        raise ValidationError(f"penalty.method must be penalty or projected")
    if cfg.penalty.shape not in ("exponential", "cubic"):
        raise ValidationError("penalty.shape must be exponential or cubic")
    if cfg.penalty.contact_tol < 0:
        raise ValidationError("penalty.contact_tol must be >= 0")
    if any(e <= 0 for e in cfg.penalty.epsilons):
        raise ValidationError("penalty.epsilons must be positive")
    if any(y <= 0 for y in cfg.query.y):
        raise ValidationError("query.y must be positive")
    if any(not 0 <= t <= cfg.model.T for t in cfg.query.t):
        raise ValidationError("query.t must lie in [0, T]")
    if cfg.mc.n_paths < 2 or cfg.mc.n_steps < 1 or cfg.mc.batch_size < 1 or cfg.mc.y0 <= 0:
        raise ValidationError("invalid mc settings")
    if cfg.sweep.param not in ModelParams.__dataclass_fields__:
        raise ValidationError(f"sweep.param {cfg.sweep.param!r} is not a model parameter")
    if cfg.sweep.workers < 1:
        raise ValidationError("sweep.workers must be at least 1")
