"""ESO cost at the money against the termination intensity and vesting date."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from indiff import GridSpec, ModelParams, PriceModel
from indiff.eso import ESOSpec, eso_cost, solve_eso
from indiff.oracle import european_call


@dataclass
class StudyConfig:
    alphas: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)
    vesting: tuple[float, ...] = (0.25, 0.5)
    n_x: int = 401
    n_theta: int = 400


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=1.0)
    args = ap.parse_args()
    cfg = StudyConfig()
    p = ModelParams(b=0.0, gamma=args.gamma)
    g = GridSpec.centered(p, 4.0, cfg.n_x, cfg.n_theta)
    m = PriceModel.build(p, g)
    print(f"european={european_call(p.K, p.K, p.c, p.T)!r} y_star(0)={m.exercise_boundary(0.0)!r}")
    print("t_v,alpha,C_atm_t0")
    for t_v in cfg.vesting:
        for a in cfg.alphas:
            sol = solve_eso(ESOSpec(p, a, t_v), m.boundary, g)
            print(f"{t_v!r},{a!r},{eso_cost(p.K, 0.0, sol)!r}")


if __name__ == "__main__":
    main()
