"""Negativity against success probability when the channel arm is attenuated first."""

from dataclasses import dataclass, field

from _common import parse_config, write_rows

import numpy as np

from qubitamp.entanglement import entangling_efficiency, tradeoff_curve


@dataclass
class Config:
    transmissivities: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    nu: list = field(default_factory=lambda: [float(x) for x in np.logspace(-4, 0, 41)])
    output: str = "results/attenuation_tradeoff.csv"


def main():
    cfg = parse_config(Config, __doc__)
    rows = [row for T in cfg.transmissivities for row in tradeoff_curve(T, cfg.nu)]
    write_rows(cfg.output, rows)
    for T in cfg.transmissivities:
        E, (nu, G) = entangling_efficiency(T)
        print(f"T={T}: best P*N = {E:.6g} at nu={nu:g}, G={G:.6g}")


if __name__ == "__main__":
    main()
