"""Success probability and nominal gain against target gain for a few vacuum weights."""

import math
from dataclasses import dataclass, field

from _common import parse_config, write_rows

import numpy as np

from qubitamp.amplifier import Policy, QubitVacuumInput, sweep_gain_probability


@dataclass
class Config:
    alpha_sq: list = field(default_factory=lambda: [0.5, 0.8, 0.95])
    gain_min: float = 1.0
    gain_max: float = 1e3
    points: int = 61
    policy: str = Policy.DD_AA_ONLY.value
    output: str = "results/gain_probability.csv"


def main():
    cfg = parse_config(Config, __doc__)
    gains = list(np.logspace(math.log10(cfg.gain_min), math.log10(cfg.gain_max), cfg.points)) + [math.inf]
    rows = []
    for a2 in cfg.alpha_sq:
        inp = QubitVacuumInput.from_vacuum_weight(a2)
        for row in sweep_gain_probability(inp, gains, Policy(cfg.policy)):
            rows.append({"alpha_sq": float(a2), **{k: float(v) for k, v in row.items()}})
    write_rows(cfg.output, rows)
    for a2 in cfg.alpha_sq:
        top = max(r["nominal_gain"] for r in rows if r["alpha_sq"] == a2)
        print(f"|alpha|^2={a2}: largest nominal gain {top:.6g}")


if __name__ == "__main__":
    main()
