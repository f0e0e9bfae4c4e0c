"""Grid refinement of the at-the-money price and the boundary at t = 0.

Each level halves dx and dtheta; the observed order uses three levels.
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from indiff import GridSpec, ModelParams, PriceModel


@dataclass
class StudyConfig:
    half_width: float = 4.0
    levels: tuple[int, ...] = (101, 201, 401, 801)
    theta_per_x: float = 1.0  # n_theta = theta_per_x * (n_x - 1)


def run(cfg: StudyConfig, p: ModelParams = ModelParams()) -> list[tuple[int, float, float]]:
    rows = []
    for n_x in cfg.levels:
        g = GridSpec.centered(p, cfg.half_width, n_x, int(cfg.theta_per_x * (n_x - 1)))
        m = PriceModel.build(p, g)
        rows.append((n_x, m.indifference_price(p.K, 0.0), m.exercise_boundary(0.0)))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, nargs="+", default=list(StudyConfig.levels))
    args = ap.parse_args()
    rows = run(StudyConfig(levels=tuple(args.levels)))
    print("n_x,P_atm,y_star_t0")
    for r in rows:
        print(",".join(repr(v) for v in r))
    P = [r[1] for r in rows]
    for a, b, c in zip(P, P[1:], P[2:]):
        if b != c and a != b:
            print(f"observed order {math.log2(abs(a - b) / abs(b - c)):.2f}")


if __name__ == "__main__":
    main()
