"""Sensitivity of the extracted exercise boundary to the contact tolerance.

Compares the default tolerance max(eps_final, 5 dx^2) with sharper values
for a negative and a positive drift under the minimal martingale measure.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from indiff import GridSpec, ModelParams
from indiff.vi import extract_boundary, solve_vi_projected, x0_limit


@dataclass
class StudyConfig:
    drifts: tuple[float, ...] = (0.05, 0.15)  # values of b
    tolerances: tuple[float, ...] = (0.0, 1e-4, 1e-5, 1e-8)  # 0 = default rule
    n_x: int = 401
    n_theta: int = 400


def run(cfg: StudyConfig):
    out = []
    for b in cfg.drifts:
        p = ModelParams(b=b)
        g = GridSpec.centered(p, 4.0, cfg.n_x, cfg.n_theta)
        sol = solve_vi_projected(g, p)
        for tol in cfg.tolerances:
            fb = extract_boundary(sol, p, tol or None)
            out.append((b, tol or sol.contact_tol, x0_limit(p), fb.s_values[0],
                        fb.s_at(0.5), fb.s_at(p.T)))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-x", type=int, default=StudyConfig.n_x)
    ap.add_argument("--n-theta", type=int, default=StudyConfig.n_theta)
    args = ap.parse_args()
    print("b,tol,x0,s_theta1,s_half,s_T")
    for row in run(StudyConfig(n_x=args.n_x, n_theta=args.n_theta)):
        print(",".join(repr(float(v)) for v in row))


if __name__ == "__main__":
    main()
