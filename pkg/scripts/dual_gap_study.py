"""Dual estimate versus path count for the plug-in control and boundary stopping."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from indiff import ModelParams, PriceModel
from indiff.dual import DualControl, MCSettings, StoppingRule, dual_value


@dataclass
class StudyConfig:
    path_counts: tuple[int, ...] = (10_000, 30_000, 100_000)
    n_steps: int = 400
    seed: int = 12345
    constant_controls: tuple[float, ...] = (0.0, 0.1, 0.3)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=StudyConfig.seed)
    cfg = StudyConfig(seed=ap.parse_args().seed)
    p = ModelParams()
    m = PriceModel.build(p)
    P = m.indifference_price(p.K, 0.0)
    rule = StoppingRule.from_boundary(m, cfg.n_steps)
    print(f"P(K,0)={P!r}")
    print("control,n_paths,dual,std_error,payoff_term,entropy_term,rel_gap")
    controls = [("plug-in", DualControl.plug_in(m))]
    controls += [(f"const {c}", DualControl.constant(c)) for c in cfg.constant_controls]
    for name, phi in controls:
        counts = cfg.path_counts if name == "plug-in" else cfg.path_counts[-1:]
        for n in counts:
            e = dual_value(p.K, phi, rule, p, MCSettings(n, cfg.n_steps, cfg.seed))
            print(f"{name},{n},{e.value!r},{e.std_error!r},{e.payoff_term!r},"
                  f"{e.entropy_term!r},{(e.value - P) / P!r}")


if __name__ == "__main__":
    main()
