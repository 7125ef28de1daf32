"""Config loading and result writing shared by the experiment scripts."""

import argparse
import csv
import dataclasses
import json
from pathlib import Path

import yaml


def parse_config(cls, description: str):
    """Build a ``cls`` instance from defaults, an optional YAML file and key=value overrides."""
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--config", help="YAML file with config fields")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args()
    values = {}
    if args.config:
        values.update(yaml.safe_load(Path(args.config).read_text()) or {})
    for item in args.set:
        key, _, raw = item.partition("=")
        values[key] = yaml.safe_load(raw)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        parser.error(f"unknown config keys: {sorted(unknown)}")
    return cls(**values)


def write_rows(path: str, rows: list[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(f"wrote {len(rows)} rows to {path}")


def write_json(path: str, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
