"""Named invariant checks on a configured grid.

Each check reports the measured quantity and the threshold it is compared
with. Reports contain no timings, so identical configs give identical
reports.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .config import RunConfig
from .domain import GridSpec, Surface, payoff
from .dual import DualControl, MCSettings, StoppingRule, dual_value
from .eso import ESOSpec, solve_eso, solve_pre_vesting, vesting_row
from .oracle import (TreeSpec, binomial_american, european_call, explicit_fd_small,
                     explicit_grid, monotonicity_probe)
from .penalty import check_bounds
from .pricing import PriceModel
from .vi import relative_sup_diff, solve_vi_penalty, solve_vi_projected, x0_limit


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "measured", float(self.measured))
        object.__setattr__(self, "threshold", float(self.threshold))


class Suite:
    """Lazily shares the expensive solves between checks."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.p = cfg.model
        self.grid = cfg.grid_spec()
        self.slack = 10.0 * (self.grid.dx + self.grid.dtheta)
        self._cache = {}

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def _solve(self, p, **kw):
        return solve_vi_penalty(self.grid, p, self.cfg.schedule(),
                                shape=self.cfg.penalty.shape, **kw)

    @property
    def model(self) -> PriceModel:
        return self._get("model", lambda: PriceModel.from_solution(
            self.p, self._solve(self.p), self.cfg.penalty.contact_tol or None))

    def atm(self, values) -> float:
        return float(values[-1, self.grid.kink_index(self.p.K)])

    # criterion 1
    def obstacle(self):
        u = self.model.surface.values
        g = payoff(self.grid.x, self.p.K)
        terminal = float(np.max(np.abs(u[0] - g)))
        lower = float(np.min(u - g[None, :]))
        return [Check(1, "terminal_row_exact", terminal == 0.0, terminal, 0.0),
                Check(1, "obstacle_dominated", lower >= -1e-12, lower, -1e-12)]

    # criterion 2
    def bounds(self):
        rep = self.model.vi.diagnostics["bounds"]
        out = []
        for key in ("lower_margin", "upper_margin", "grad_lower_margin", "grad_upper_margin"):
            v = rep[key]
            out.append(Check(2, f"apriori_{key}", not check_bounds({key: v}, self.slack),
                             v, -self.slack))
        g = self.grid
        u = self.model.surface.values
        dpos = max(self.p.drift, 0.0)
        fwd = np.diff(u, axis=1) / g.dx
        xm = 0.5 * (g.x[1:] + g.x[:-1])
        cap = np.exp(xm[None, :] + dpos * g.theta[:, None]) + 10 * g.dx
        lo = float(np.min(fwd))
        hi = float(np.min(cap - fwd))
        out.append(Check(2, "gradient_nonneg", lo >= -1e-12, lo, -1e-12))
        out.append(Check(2, "gradient_cap", hi >= 0.0, hi, 0.0, "cap includes 10*dx"))
        return out

    # criterion 3
    def time_monotone(self):
        d = float(np.min(np.diff(self.model.surface.values, axis=0)) / self.grid.dtheta)
        return [Check(3, "dtheta_nonneg", d >= -1e-10, d, -1e-10)]

    # criterion 4
    def boundary(self):
        fb = self.model.boundary
        x0 = x0_limit(self.p)
        dx = self.grid.dx
        out = []
        if fb.censored[0]:
            return [Check(4, "boundary_first_row", False, math.inf, 2 * dx, "censored")]
        err = abs(fb.s_values[0] - x0)
        out.append(Check(4, "boundary_start_near_x0", err <= 2 * dx, err, 2 * dx))
        ok = ~fb.censored
        s = fb.s_values[ok]
        mono = float(np.min(np.diff(s))) if s.size > 1 else 0.0
        out.append(Check(4, "boundary_nondecreasing", mono >= 0.0, mono, 0.0))
        raw = fb.raw_values[ok]
        worst = float(np.max(np.maximum.accumulate(raw) - raw)) / dx if raw.size else 0.0
        out.append(Check(4, "boundary_raw_violation_cells", worst <= 2.0, worst, 2.0,
                         f"censored rows: {int(fb.censored.sum())}"))
        return out

    # criterion 5
    def agreement(self):
        proj = solve_vi_projected(self.grid, self.p)
        rel = relative_sup_diff(self.model.surface.values, proj.surface.values)
        eg = explicit_grid(self.p)
        ex = explicit_fd_small(eg, self.p)
        ref = float(ex.values[-1, eg.kink_index(self.p.K)])
        e_rel = abs(self.atm(self.model.surface.values) - ref) / ref
        return [Check(5, "penalty_vs_projected_relsup", rel <= 1e-3, rel, 1e-3),
                Check(5, "penalty_vs_explicit_atm", e_rel <= 5e-3, e_rel, 5e-3)]

    # criterion 6
    def linear_limit(self):
        q = self.p.replace(gamma=1e-3)
        u = self._solve(q).surface.values
        tree = binomial_american(TreeSpec.from_params(q, 2000), self.p.K)
        rel = abs(self.atm(u) - tree) / tree
        return [Check(6, "small_gamma_vs_binomial", rel <= 5e-3, rel, 5e-3)]

    # criterion 7
    def monotonicity(self):
        base = self.model.vi

        def solve(grid, p, scale=1.0):
            if p == self.p and scale == 1.0:
                return base
            return self._solve(p, scale=scale)

        return [Check(7, r.name, r.passed, r.worst, -r.slack)
                for r in monotonicity_probe(self.p, self.grid, solve)]

    # criterion 8
    def hedge(self):
        p0 = self.p.replace(rho=0.0)
        m0 = PriceModel.from_solution(p0, self._solve(p0))
        target = p0.lam / (p0.sigma * p0.gamma)
        ys = np.exp(np.linspace(-1.0, 1.0, 21)) * p0.K
        ts = np.linspace(0.0, p0.T, 11)
        dev = max(abs(m0.hedge_ratio(y, t) - target) for y in ys for t in ts)
        m = self.model
        p = self.p
        g = self.grid
        dpos = max(p.drift, 0.0)
        top = p.lam / (p.sigma * p.gamma)
        worst = math.inf
        for j in range(0, g.n_theta + 1, 10):
            t = p.T - g.theta[j]
            for x in g.x[1:-1:4]:
                pi = m.hedge_ratio(math.exp(x), t)
                floor = top - p.rho * p.c / p.sigma * (math.exp(x + dpos * g.theta[j]) + 10 * g.dx)
                worst = min(worst, pi - floor, top - pi)
        return [Check(8, "hedge_rho0_constant", dev <= 1e-12, dev, 1e-12),
                Check(8, "hedge_transported_bound", worst >= -1e-12, worst, -1e-12)]

    # criterion 9
    def dual(self):
        m, p, mc = self.model, self.p, self.cfg.mc
        y0 = p.K
        P = m.indifference_price(y0, 0.0)
        settings = MCSettings(mc.n_paths, mc.n_steps, mc.seed, mc.batch_size)
        est = dual_value(y0, DualControl.plug_in(m), StoppingRule.from_boundary(m, mc.n_steps),
                         p, settings)
        gap = abs(est.value - P)
        tol = 0.01 * P + 3 * est.std_error
        lower = max(y0 - p.K, 0.0) - P
        return [Check(9, "dual_bracket", gap <= tol, gap, tol,
                      f"dual={est.value!r} se={est.std_error!r} P={P!r}"),
                Check(9, "immediate_exercise_lower", lower <= 1e-10, lower, 1e-10)]

    # criterion 10
    def eso(self):
        p = self.p.replace(b=0.0)
        g = self.grid
        t_v = self._aligned_tv(self.cfg.eso.t_v)
        out = []
        euro = solve_eso(ESOSpec(p, 0.0, t_v), None, g)
        k = g.kink_index(p.K)
        closed = european_call(p.K, p.K, p.c, p.T)
        rel = abs(euro.pre_vesting.values[-1, k] - closed) / closed
        out.append(Check(10, "eso_european_closed_form", rel <= 5e-3, rel, 5e-3))
        flat_err = 0.0
        for a in (0.0, 0.5):
            spec = ESOSpec(p, a, t_v)
            jv = vesting_row(spec, g)
            sub = GridSpec(g.x_min, g.x_max, g.n_x, jv, p.T - t_v)
            kappa = 0.37
            pre = solve_pre_vesting(spec, Surface(sub, np.full((jv + 1, g.n_x), kappa)))
            th = pre.grid.theta[:, None]
            flat_err = max(flat_err, float(np.max(np.abs(pre.values - kappa * np.exp(-a * th)))))
        out.append(Check(10, "eso_flat_identity", flat_err <= 1e-10, flat_err, 1e-10))
        pm = PriceModel.from_solution(p, self._solve(p), self.cfg.penalty.contact_tol or None)
        sols = [solve_eso(ESOSpec(p, a, t_v), pm.boundary, g) for a in (0.0, 0.1, 0.5)]
        seam = max(s.seam_gap for s in sols)
        out.append(Check(10, "eso_seam_continuity", seam <= 1e-10, seam, 1e-10))
        worst = math.inf
        for lo, hi in zip(sols, sols[1:]):
            worst = min(worst, float(np.min(lo.pre_vesting.values - hi.pre_vesting.values)),
                        float(np.min(lo.post_vesting.values - hi.post_vesting.values)))
        out.append(Check(10, "eso_alpha_monotone", worst >= -1e-12, worst, -1e-12))
        c0 = sols[0].pre_vesting.values[-1, k]
        upper = european_call(p.K, p.K, p.c, p.T)
        margin = min(c0 - 0.0, upper - c0)
        out.append(Check(10, "eso_between_intrinsic_and_european", margin >= -5e-3 * upper,
                         margin, -5e-3 * upper))
        return out

    def _aligned_tv(self, t_v: float) -> float:
        dt = self.grid.dtheta
        j = max(1, min(self.grid.n_theta - 1, int(round((self.p.T - t_v) / dt))))
        return self.p.T - j * dt

    def run(self) -> list[Check]:
        out = []
        for step in (self.obstacle, self.bounds, self.time_monotone, self.boundary,
                     self.agreement, self.linear_limit, self.monotonicity, self.hedge,
                     self.dual, self.eso):
            out.extend(step())
        return out


def run_selftest(cfg: RunConfig) -> list[Check]:
    return Suite(cfg).run()


def report_dict(checks: list[Check]) -> dict:
    return {
        "passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }


def format_line(c: Check) -> str:
    verdict = "PASS" if c.passed else "FAIL"
    return f"[{verdict}] criterion {c.criterion:>2} {c.name}: measured={c.measured!r} threshold={c.threshold!r}"
