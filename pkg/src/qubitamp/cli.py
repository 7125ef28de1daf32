"""Command-line front end: each subcommand turns a config into one table.

    qubitamp gain-sweep --config gain.yaml --output gain.csv
    qubitamp diqkd --set loss_db='[0, 10, 20]' --format json --jobs 4
    qubitamp check

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .amplifier import (
    AmplifierConfig,
    Policy,
    QubitVacuumInput,
    amplify_closed_form,
    amplify_simulated,
    gain,
    sweep_gain_probability,
)
from .diqkd import CHSHSettings, ProtocolParams, SourceModel, keyrate_vs_loss
from .elements import DetectorKind, DetectorModel
from .entanglement import (
    Measure,
    amplified_state,
    attenuated_amplified,
    concurrence,
    distill_success_probability,
    entangling_efficiency,
    lossy_state,
    negativity,
    optimal_gain,
    relative_entropy_of_entanglement,
    simulate_distillation,
    tradeoff_curve,
)
from .errors import ConfigError, NumericError, ParamError, PolicyError, QubitAmpError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ---------------------------------------------------------------- grids

def parse_grid(value, name: str) -> list[float]:
    """A grid is a list of numbers or {start, stop, num, spacing: linear|log}."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: non-numeric entry ({exc})") from None
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num", "spacing"}
        if extra:
            raise ConfigError(f"{name}: unknown grid keys {sorted(extra)}")
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except KeyError as exc:
            raise ConfigError(f"{name}: grid needs start, stop and num (missing {exc})") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: {exc}") from None
        spacing = value.get("spacing", "linear")
        if num < 1:
            raise ConfigError(f"{name}: num must be >= 1")
        if spacing == "linear":
            return [float(x) for x in np.linspace(start, stop, num)]
        if spacing == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"{name}: log spacing needs positive bounds")
            return [float(x) for x in np.geomspace(start, stop, num)]
        raise ConfigError(f"{name}: spacing must be 'linear' or 'log', got {spacing!r}")
    raise ConfigError(f"{name}: expected a list or a grid mapping, got {type(value).__name__}")


def _nonempty(grid: list[float], name: str) -> list[float]:
    if not grid:
        raise ConfigError(f"{name}: empty grid")
    if not all(math.isfinite(x) for x in grid):
        raise ConfigError(f"{name}: non-finite entry")
    return grid


# ---------------------------------------------------------------- configs

@dataclass
class GainSweepConfig:
    alpha_sq: Any = field(default_factory=lambda: [0.25, 0.5, 0.75, 0.95])
    gains: Any = field(default_factory=lambda: {"start": 1, "stop": 100, "num": 100, "spacing": "log"})
    include_infinite_gain: bool = True
    policy: str = "DD_AA_only"


@dataclass
class AmplifyConfig:
    alpha_sq: Any = field(default_factory=lambda: [0.5])
    theta: float = 0.0
    phi: float = 0.0
    r: Any = field(default_factory=lambda: {"start": 0, "stop": 1, "num": 11})
    policy: str = "DD_AA_only"
    simulate: bool = True


@dataclass
class DistillConfig:
    table: str = "optimal_gain"
    transmissivities: Any = field(default_factory=lambda: {"start": 0.1, "stop": 1.0, "num": 10})
    gains: Any = field(default_factory=lambda: {"start": 1, "stop": 20, "num": 191})
    measures: Any = field(default_factory=lambda: ["negativity", "concurrence", "ree"])
    ree_tolerance: float = 1e-6


@dataclass
class AttenuateConfig:
    table: str = "tradeoff"
    transmissivities: Any = field(default_factory=lambda: [0.25, 0.5, 0.75])
    nu: Any = field(default_factory=lambda: {"start": 0.01, "stop": 1.0, "num": 100})
    gain_cap: float = 1000.0


@dataclass
class DiqkdConfig:
    pair_prob: float = 2e-3
    truncation: int = 2
    loss_db: Any = field(default_factory=lambda: {"start": 0, "stop": 70, "num": 15})
    dark_count_probs: Any = field(default_factory=lambda: [1e-10, 1e-8])
    herald_efficiency: float = 0.95 * 0.91
    bell_efficiency: float = 0.95 * 0.91
    r_grid: Any = None
    alice_angles: Any = field(default_factory=lambda: [0.0, math.pi / 4])
    bob_angles: Any = field(default_factory=lambda: [math.pi / 8, -math.pi / 8])
    key_angles: Any = field(default_factory=lambda: [0.0, 0.0])


@dataclass
class CheckConfig:
    samples: int = 1000
    seed: int = 20131
    tolerance: float = 1e-10


COMMANDS = {
    "gain-sweep": GainSweepConfig,
    "amplify": AmplifyConfig,
    "distill": DistillConfig,
    "attenuate": AttenuateConfig,
    "diqkd": DiqkdConfig,
    "check": CheckConfig,
}

RUN_KEYS = {"output", "format", "jobs"}


@dataclass
class RunConfig:
    command: str
    params: Any
    output: str | None = None
    format: str = "csv"
    jobs: int = 1

    def canonical(self) -> dict:
        return {"command": self.command, "params": dataclasses.asdict(self.params)}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def parse_override(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {item!r} is not key=value")
    try:
        return key.strip().replace("-", "_"), yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {item!r}: {exc}") from None


def _check_scalar(name: str, value, default):
    """Scalar settings must keep the type of their default (ints allowed for floats)."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        return
    if not ok:
        raise ConfigError(f"{name}: expected {type(default).__name__}, got {value!r}")


def build_run_config(command: str, raw: dict, overrides: dict | None = None) -> RunConfig:
    """Merge file values and overrides; unknown keys are rejected."""
    cls = COMMANDS[command]
    merged = {**raw, **(overrides or {})}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(merged) - known - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    params = cls(**{k: v for k, v in merged.items() if k in known})
    for f in dataclasses.fields(cls):
        _check_scalar(f.name, getattr(params, f.name), getattr(cls(), f.name))
    fmt = merged.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    jobs = merged.get("jobs", 1)
    if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
        raise ConfigError(f"jobs must be a positive integer, got {jobs!r}")
    return RunConfig(command, params, merged.get("output"), fmt, jobs)


# ---------------------------------------------------------------- output

@dataclass
class Table:
    columns: list[str]
    rows: list[dict]
    inf_columns: tuple[str, ...] = ("gain",)


def _format_value(value, column: str, inf_columns) -> str | int | float:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    x = float(value)
    if math.isinf(x) and x > 0 and column in inf_columns:
        return "inf"
    if not math.isfinite(x):
        raise NumericError(f"non-finite value {x} in column {column!r}")
    return x


def render(table: Table, run: RunConfig) -> str:
    rows = [{c: _format_value(row[c], c, table.inf_columns) for c in table.columns} for row in table.rows]
    meta = {"tool": f"qubitamp {__version__}", "command": run.command, "config_sha256": run.digest()}
    if run.format == "json":
        return json.dumps({"meta": meta, "columns": table.columns, "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in table.columns)])
    return buf.getvalue()


@contextmanager
def worker_map(jobs: int):
    """``map`` for one job, otherwise an ordered process-pool map."""
    if jobs <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool.map


# ---------------------------------------------------------------- commands

def _policy(name: str) -> Policy:
    try:
        return Policy(name)
    except ValueError:
        raise ConfigError(f"policy must be one of {[p.value for p in Policy]}, got {name!r}") from None


def _unit(values, name, open_high=False):
    for v in values:
        if not 0 <= v <= 1 or (open_high and v == 1):
            raise ConfigError(f"{name}: {v} outside [0, 1{')' if open_high else ']'}")
    return values


def run_gain_sweep(cfg: GainSweepConfig, _map) -> Table:
    alphas = _unit(_nonempty(parse_grid(cfg.alpha_sq, "alpha_sq"), "alpha_sq"), "alpha_sq", open_high=True)
    gains = _nonempty(parse_grid(cfg.gains, "gains"), "gains")
    if cfg.include_infinite_gain:
        gains = gains + [math.inf]
    policy = _policy(cfg.policy)
    rows = []
    for a2 in alphas:
        inp = QubitVacuumInput.from_vacuum_weight(a2)
        for row in sweep_gain_probability(inp, gains, policy):
            rows.append({"alpha_sq": a2, **row})
    return Table(["alpha_sq", "gain", "r", "success_prob", "nominal_gain"], rows)


def run_amplify(cfg: AmplifyConfig, _map) -> Table:
    alphas = _unit(_nonempty(parse_grid(cfg.alpha_sq, "alpha_sq"), "alpha_sq"), "alpha_sq")
    rs = _unit(_nonempty(parse_grid(cfg.r, "r"), "r"), "r")
    policy = _policy(cfg.policy)
    rows = []
    for a2 in alphas:
        inp = QubitVacuumInput.from_vacuum_weight(a2, cfg.theta, cfg.phi)
        for r in rs:
            conf = AmplifierConfig(r, policy)
            out = amplify_closed_form(inp, conf)
            row = {"alpha_sq": a2, "r": r, "gain": out.gain, "success_prob": out.success_prob,
                   "nominal_gain": out.nominal_gain, "out_vacuum_weight": out.output.vacuum_weight}
            if cfg.simulate:
                sim = amplify_simulated(inp, conf)
                row["sim_success_prob"] = sim.success_prob
                row["sim_fidelity"] = sim.output.fidelity(out.output)
            rows.append(row)
    cols = ["alpha_sq", "r", "gain", "success_prob", "nominal_gain", "out_vacuum_weight"]
    if cfg.simulate:
        cols += ["sim_success_prob", "sim_fidelity"]
    return Table(cols, rows)


def _optimal_gain_row(job):
    T, measures, tol = job
    row = {"T": T}
    for m in measures:
        row[f"gain_opt_{m.value}"] = optimal_gain(T, m, tol)
    return row


def _before_after_row(job):
    T, tol = job
    before = lossy_state(T)
    row = {"T": T, "C": concurrence(before), "N": negativity(before),
           "S": relative_entropy_of_entanglement(before)}
    for key, m, fn in (("C_opt", Measure.CONCURRENCE, concurrence), ("N_opt", Measure.NEGATIVITY, negativity),
                       ("S_opt", Measure.REE, relative_entropy_of_entanglement)):
        G = optimal_gain(T, m, tol)
        row[key] = fn(amplified_state(T, G)[0])
    return row


def run_distill(cfg: DistillConfig, _map) -> Table:
    Ts = _nonempty(parse_grid(cfg.transmissivities, "transmissivities"), "transmissivities")
    for T in Ts:
        if not 0 < T <= 1:
            raise ConfigError(f"transmissivities: {T} outside (0, 1]")
    if cfg.table == "negativity_curve":
        gains = _nonempty(parse_grid(cfg.gains, "gains"), "gains")
        rows = []
        for T in Ts:
            for G in gains:
                s, _ = amplified_state(T, G)
                rows.append({"T": T, "gain": G, "negativity": negativity(s),
                             "success_prob": distill_success_probability(T, G)})
        return Table(["T", "gain", "negativity", "success_prob"], rows)
    if cfg.table == "optimal_gain":
        try:
            measures = [Measure(m) for m in cfg.measures]
        except ValueError:
            raise ConfigError(f"measures must be drawn from {[m.value for m in Measure]}") from None
        rows = list(_map(_optimal_gain_row, [(T, measures, cfg.ree_tolerance) for T in Ts]))
        return Table(["T"] + [f"gain_opt_{m.value}" for m in measures], rows)
    if cfg.table == "before_after":
        rows = list(_map(_before_after_row, [(T, cfg.ree_tolerance) for T in Ts]))
        return Table(["T", "C", "N", "S", "C_opt", "N_opt", "S_opt"], rows)
    raise ConfigError(f"distill table must be negativity_curve, optimal_gain or before_after, got {cfg.table!r}")


def _tradeoff_rows(job):
    T, nus = job
    return tradeoff_curve(T, nus)


def _efficiency_row(job):
    T, nus, cap = job
    E, (nu, G) = entangling_efficiency(T, nus, cap)
    return {"T": T, "efficiency": E, "nu_star": nu, "gain_star": G,
            "success_prob": attenuated_amplified(nu, T, G)[1]}


def run_attenuate(cfg: AttenuateConfig, _map) -> Table:
    Ts = _nonempty(parse_grid(cfg.transmissivities, "transmissivities"), "transmissivities")
    nus = _nonempty(parse_grid(cfg.nu, "nu"), "nu")
    for name, grid in (("transmissivities", Ts), ("nu", nus)):
        for x in grid:
            if not 0 < x <= 1:
                raise ConfigError(f"{name}: {x} outside (0, 1]")
    if cfg.table == "tradeoff":
        rows = [row for block in _map(_tradeoff_rows, [(T, nus) for T in Ts]) for row in block]
        return Table(["T", "nu", "gain", "negativity", "success_prob"], rows)
    if cfg.table == "efficiency":
        if not cfg.gain_cap >= 1:
            raise ConfigError("gain_cap must be >= 1")
        rows = list(_map(_efficiency_row, [(T, nus, cfg.gain_cap) for T in Ts]))
        return Table(["T", "efficiency", "nu_star", "gain_star", "success_prob"], rows)
    raise ConfigError(f"attenuate table must be tradeoff or efficiency, got {cfg.table!r}")


def diqkd_params(cfg: DiqkdConfig, dark_count_prob: float) -> ProtocolParams:
    return ProtocolParams(
        source=SourceModel(cfg.pair_prob, cfg.truncation),
        herald_detectors=DetectorModel(DetectorKind.BUCKET, cfg.herald_efficiency, dark_count_prob),
        bell_detectors=DetectorModel(DetectorKind.PNR, cfg.bell_efficiency, 0.0),
        measurement_settings=CHSHSettings(*(tuple(parse_grid(v, n)) for v, n in (
            (cfg.alice_angles, "alice_angles"), (cfg.bob_angles, "bob_angles"), (cfg.key_angles, "key_angles")))),
    )


def run_diqkd(cfg: DiqkdConfig, _map) -> Table:
    losses = _nonempty(parse_grid(cfg.loss_db, "loss_db"), "loss_db")
    darks = _nonempty(parse_grid(cfg.dark_count_probs, "dark_count_probs"), "dark_count_probs")
    r_grid = None if cfg.r_grid is None else _unit(_nonempty(parse_grid(cfg.r_grid, "r_grid"), "r_grid"), "r_grid")
    rows = []
    for pd in darks:
        for row in keyrate_vs_loss(diqkd_params(cfg, pd), losses, r_grid, map_fn=_map):
            rows.append({"dark_count_prob": pd, **row})
    return Table(["dark_count_prob", "loss_db", "r_star", "mu_cc", "Q", "S", "mu", "R"], rows)


def oracle_deviations(samples: int, seed: int) -> dict[str, float]:
    """Largest closed-form vs Fock-simulation deviations over random inputs."""
    rng = np.random.default_rng(seed)
    dev = {"success_prob": 0.0, "output_infidelity": 0.0, "gain_rel": 0.0}
    for _ in range(samples):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        inp = QubitVacuumInput.normalize(*z)
        r = float(rng.uniform(0, 1))
        conf = AmplifierConfig(r)
        closed, sim = amplify_closed_form(inp, conf), amplify_simulated(inp, conf)
        dev["success_prob"] = max(dev["success_prob"], abs(closed.success_prob - sim.success_prob))
        dev["output_infidelity"] = max(dev["output_infidelity"], 1 - sim.output.fidelity(closed.output))
        g = gain(r)
        dev["gain_rel"] = max(dev["gain_rel"], abs(sim.gain - g) / max(g, 1e-300))
    for T in (0.1, 0.5, 0.9):
        for G in (1.0, 2.5, 10.0):
            _, p = simulate_distillation(T, G)
            dev["distill_success_prob"] = max(dev.get("distill_success_prob", 0.0),
                                              abs(p - distill_success_probability(T, G)))
    return dev


def run_check(cfg: CheckConfig, _map) -> Table:
    if cfg.samples < 1:
        raise ConfigError("samples must be >= 1")
    dev = oracle_deviations(cfg.samples, cfg.seed)
    rows = [{"quantity": k, "max_deviation": v, "tolerance": cfg.tolerance, "passed": v <= cfg.tolerance}
            for k, v in dev.items()]
    return Table(["quantity", "max_deviation", "tolerance", "passed"], rows)


RUNNERS: dict[str, Callable] = {
    "gain-sweep": run_gain_sweep,
    "amplify": run_amplify,
    "distill": run_distill,
    "attenuate": run_attenuate,
    "diqkd": run_diqkd,
    "check": run_check,
}


def execute(run: RunConfig) -> str:
    with worker_map(run.jobs) as _map:
        table = RUNNERS[run.command](run.params, _map)
    text = render(table, run)
    if run.command == "check" and not all(row["passed"] for row in table.rows):
        raise NumericError("oracle check exceeded tolerance:\n" + text)
    return text


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qubitamp", description="Qubit amplifier simulations.")
    parser.add_argument("--version", action="version", version=f"qubitamp {__version__}")
    parser.add_argument("--check", action="store_true", help="run the oracle equivalence check and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} table")
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--jobs", "-j", type=int, help="worker processes")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (value parsed as YAML)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = "check" if args.check else args.command
    if command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        raw = load_config_file(args.config) if getattr(args, "config", None) else {}
        overrides = dict(parse_override(s) for s in getattr(args, "set", []))
        for key in ("output", "format", "jobs"):
            if getattr(args, key, None) is not None:
                overrides[key] = getattr(args, key)
        run = build_run_config(command, raw, overrides)
        text = execute(run)
    except (ConfigError, ParamError, PolicyError) as exc:
        print(f"qubitamp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QubitAmpError, ArithmeticError) as exc:
        print(f"qubitamp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if run.output:
        Path(run.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
