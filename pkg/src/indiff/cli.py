"""``indiff`` command-line front end.

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .domain import OutOfDomainError, ValidationError
from .dual import DualControl, MCSettings, StoppingRule, dual_value
from .eso import ESOSpec, eso_cost, solve_eso
from .penalty import SolverError
from .pricing import PriceModel
from .selftest import format_line, report_dict, run_selftest
from .vi import solve_vi_penalty

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_SELFTEST = 0, 1, 2, 3


def _num(v) -> str:
    return repr(float(v))


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(v if isinstance(v, str) else _num(v) for v in r) for r in rows)
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file to a temp name first, then rename; nothing partial survives."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def _check_queries(cfg: RunConfig) -> None:
    g = cfg.grid_spec()
    lo, hi = math.exp(g.x_min), math.exp(g.x_max)
    for y in cfg.query.y:
        if not lo <= y <= hi:
            raise OutOfDomainError(f"query y={y!r} outside grid window [{lo:.6g}, {hi:.6g}]")


def _build(cfg: RunConfig, params=None) -> PriceModel:
    p = params or cfg.model
    g = cfg.grid_spec()
    tol = cfg.penalty.contact_tol or None
    if cfg.penalty.method == "projected":
        return PriceModel.build(p, g, method="projected", contact_tol=tol)
    n = max(abs(g.x_min), abs(g.x_max))
    vi = solve_vi_penalty(g, p, [(e, n) for e in cfg.penalty.epsilons], shape=cfg.penalty.shape)
    return PriceModel.from_solution(p, vi, tol)


def _meta(cfg: RunConfig, m: PriceModel) -> dict:
    diag = {k: v for k, v in m.vi.diagnostics.items()}
    return {
        "params": cfg.model.as_dict(),
        "grid": m.grid.as_dict(),
        "method": m.vi.method,
        "diagnostics": diag,
        "bound_check": m.bound_check(),
        "censored_boundary_rows": int(m.boundary.censored.sum()),
        "config": cfg.to_dict(),
    }


def cmd_price(cfg: RunConfig) -> dict[str, str]:
    _check_queries(cfg)
    m = _build(cfg)
    rows = [(y, t, m.indifference_price(y, t)) for y in cfg.query.y for t in cfg.query.t]
    return {"price.csv": _csv(["y", "t", "P"], rows), "price.json": _dump(_meta(cfg, m))}


def cmd_boundary(cfg: RunConfig) -> dict[str, str]:
    m = _build(cfg)
    g = m.grid
    T = cfg.model.T
    ts = [T - th for th in g.theta[:0:-1]]
    rows = [(t, m.exercise_boundary(t)) for t in ts]
    meta = {"censored_t": [t for t, y in rows if math.isinf(y)], "grid": g.as_dict(),
            "params": cfg.model.as_dict()}
    return {"boundary.csv": _csv(["t", "y_star"], rows), "boundary.json": _dump(meta)}


def cmd_hedge(cfg: RunConfig) -> dict[str, str]:
    _check_queries(cfg)
    m = _build(cfg)
    rows = [(y, t, m.hedge_ratio(y, t)) for y in cfg.query.y for t in cfg.query.t]
    return {"hedge.csv": _csv(["y", "t", "pi"], rows)}


def cmd_eso(cfg: RunConfig) -> dict[str, str]:
    _check_queries(cfg)
    spec = ESOSpec(cfg.model, cfg.eso.alpha, cfg.eso.t_v)
    m = _build(cfg)
    sol = solve_eso(spec, m.boundary, m.grid)
    rows = [(y, t, eso_cost(y, t, sol)) for y in cfg.query.y for t in cfg.query.t]
    meta = {"alpha": spec.alpha, "t_v": spec.t_v, "seam_gap": sol.seam_gap,
            "min_cost": min(float(sol.pre_vesting.values.min()),
                            float(sol.post_vesting.values.min())),
            "params": cfg.model.as_dict()}
    return {"eso.csv": _csv(["y", "t", "C"], rows), "eso.json": _dump(meta)}


def cmd_dualcheck(cfg: RunConfig) -> dict[str, str]:
    mc = cfg.mc
    m = _build(cfg)
    p = cfg.model
    P = m.indifference_price(mc.y0, 0.0)
    settings = MCSettings(mc.n_paths, mc.n_steps, mc.seed, mc.batch_size)
    rule = StoppingRule.from_boundary(m, mc.n_steps)
    est = dual_value(mc.y0, DualControl.plug_in(m), rule, p, settings)
    tol = 0.01 * P + 3 * est.std_error
    intrinsic = max(mc.y0 - p.K, 0.0)
    report = {
        "y0": mc.y0, "price": P,
        "dual": {"value": est.value, "std_error": est.std_error, "n_paths": est.n_paths,
                 "payoff_term": est.payoff_term, "entropy_term": est.entropy_term,
                 "mean_tau": est.mean_tau},
        "upper_bracket": {"gap": abs(est.value - P), "tolerance": tol,
                          "passed": abs(est.value - P) <= tol},
        "lower_bracket": {"intrinsic": intrinsic, "passed": intrinsic <= P + 1e-10},
        "mc": {"seed": mc.seed, "n_steps": mc.n_steps, "batch_size": mc.batch_size},
    }
    return {"dual_check.json": _dump(report)}


def _sweep_one(cfg: RunConfig, value: float):
    p = cfg.model.replace(**{cfg.sweep.param: value})
    m = _build(cfg, p)
    return [(cfg.sweep.param, value, y, t, m.indifference_price(y, t))
            for y in cfg.query.y for t in cfg.query.t]


def pool_size(cfg: RunConfig) -> int:
    env = os.environ.get("INDIFF_THREADS")
    if env is None or env.strip() == "":
        return cfg.sweep.workers
    try:
        n = int(env)
    except ValueError:
        raise ValidationError(f"INDIFF_THREADS={env!r} is not an integer") from None
    if n < 1:
        raise ValidationError("INDIFF_THREADS must be at least 1")
    return n


def cmd_sweep(cfg: RunConfig) -> dict[str, str]:
    _check_queries(cfg)
    from .domain import validate_params
    for v in cfg.sweep.values:
        validate_params(cfg.model.replace(**{cfg.sweep.param: v}))
    with ThreadPoolExecutor(max_workers=pool_size(cfg)) as pool:
        chunks = list(pool.map(lambda v: _sweep_one(cfg, v), cfg.sweep.values))
    rows = [r for chunk in chunks for r in chunk]
    return {"sweep.csv": _csv(["param", "value", "y", "t", "P"], rows)}


def cmd_selftest(cfg: RunConfig) -> dict[str, str]:
    checks = run_selftest(cfg)
    for c in checks:
        print(format_line(c))
    rep = report_dict(checks)
    return {"selftest.json": _dump(rep), "_passed": rep["passed"]}


COMMANDS = {
    "price": cmd_price, "boundary": cmd_boundary, "hedge": cmd_hedge, "eso": cmd_eso,
    "dual-check": cmd_dualcheck, "sweep": cmd_sweep, "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="indiff", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="out")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        files = COMMANDS[args.command](cfg)
        passed = files.pop("_passed", True)
        write_outputs(Path(args.out), files)
    except (ValidationError, OutOfDomainError) as e:
        print(f"indiff: validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"indiff: solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    if not passed:
        print("indiff: selftest failed", file=sys.stderr)
        return EXIT_SELFTEST
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
