"""Key rate against channel loss with the reflectivity optimized per point.

With ``golden`` set, the rows are also stored as the regression reference
used by the test suite.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from _common import parse_config, write_json, write_rows

from qubitamp.diqkd import ProtocolParams, SourceModel, keyrate_vs_loss, reference_herald_detectors


@dataclass
class Config:
    pair_prob: float = 2e-3
    dark_count_probs: list = field(default_factory=lambda: [1e-10, 1e-8])
    loss_db: list = field(default_factory=lambda: [0, 10, 20, 30, 40, 50, 60])
    jobs: int = 1
    output: str = "results/diqkd_keyrate.csv"
    golden: str = ""


def sweep(cfg: Config, map_fn=map) -> list[dict]:
    rows = []
    for pd in cfg.dark_count_probs:
        params = ProtocolParams(source=SourceModel(cfg.pair_prob), herald_detectors=reference_herald_detectors(pd))
        for row in keyrate_vs_loss(params, cfg.loss_db, map_fn=map_fn):
            rows.append({"dark_count_prob": float(pd), **row})
    return rows


def main():
    cfg = parse_config(Config, __doc__)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            rows = sweep(cfg, pool.map)
    else:
        rows = sweep(cfg)
    write_rows(cfg.output, rows)
    for row in rows:
        print(f"pd={row['dark_count_prob']:.0e} loss={row['loss_db']:>4.0f} dB  r*={row['r_star']:.3g}"
              f"  S={row['S']:.4f}  R={row['R']:.4e}")
    if cfg.golden:
        write_json(cfg.golden, {"pair_prob": cfg.pair_prob, "rows": rows})


if __name__ == "__main__":
    main()
