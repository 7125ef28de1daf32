import json
import math
import subprocess
import sys

import pytest

from qubitamp.cli import (
    EXIT_CONFIG,
    EXIT_NUMERIC,
    EXIT_OK,
    build_run_config,
    main,
    parse_grid,
)
from qubitamp.errors import ConfigError


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_grid_forms():
    assert parse_grid(0.5, "x") == [0.5]
    assert parse_grid([1, 2], "x") == [1.0, 2.0]
    assert parse_grid({"start": 0, "stop": 1, "num": 3}, "x") == [0.0, 0.5, 1.0]
    assert parse_grid({"start": 1, "stop": 100, "num": 3, "spacing": "log"}, "x") == pytest.approx([1, 10, 100])
    for bad in ({"start": 0, "stop": 1}, {"start": 0, "stop": 1, "num": 2, "spacing": "cubic"}, "abc", [1, "a"]):
        with pytest.raises(ConfigError):
            parse_grid(bad, "x")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        build_run_config("amplify", {"gian": 3})


def test_scalar_type_checked():
    with pytest.raises(ConfigError):
        build_run_config("amplify", {"theta": "abc"})
    with pytest.raises(ConfigError):
        build_run_config("check", {"samples": 1.5})


def test_gain_sweep_csv(capsys):
    code, out, _ = run(["gain-sweep", "--set", "alpha_sq=[0.95]", "--set", "gains=[1, 10]"], capsys)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith("# tool: qubitamp")
    assert lines[3] == "alpha_sq,gain,r,success_prob,nominal_gain"
    assert lines[-1].split(",")[1] == "inf"
    assert float(lines[-1].split(",")[-1]) == pytest.approx(20)


def test_amplify_json(capsys):
    code, out, _ = run(["amplify", "--set", "alpha_sq=[0.5]", "--set", "r=[1.0]", "--set", "simulate=true",
                        "--format", "json"], capsys)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["meta"]["command"] == "amplify"
    row = data["rows"][0]
    assert row["success_prob"] == pytest.approx(1) and row["sim_fidelity"] == pytest.approx(1)


def test_feed_forward_policy_error(capsys):
    code, _, err = run(["amplify", "--set", "r=[0.3]", "--set", "policy=with_feed_forward"], capsys)
    assert code == EXIT_CONFIG and "feed-forward" in err


def test_zero_success_is_numeric_failure(capsys):
    code, _, err = run(["amplify", "--set", "alpha_sq=[0]", "--set", f"r=[{1 / math.sqrt(3)!r}]"], capsys)
    assert code == EXIT_NUMERIC


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "c.yaml"
    path.write_text("- not a mapping\n")
    assert run(["distill", "--config", str(path)], capsys)[0] == EXIT_CONFIG
    assert run(["distill", "--config", str(tmp_path / "missing.yaml")], capsys)[0] == EXIT_CONFIG


def test_config_file_and_output(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"table": "optimal_gain", "transmissivities": [0.5], "measures": ["negativity"]}))
    out = tmp_path / "o.csv"
    assert run(["distill", "--config", str(cfg), "-o", str(out)], capsys)[0] == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[-1].startswith("0.5,")


def test_attenuate_efficiency(capsys):
    code, out, _ = run(["attenuate", "--set", "table=efficiency", "--set", "transmissivities=[0.5]",
                        "--format", "json"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["rows"][0]["nu_star"] == 1.0


def test_no_command_is_config_error(capsys):
    assert run([], capsys)[0] == EXIT_CONFIG


def test_check_flag(capsys):
    code, out, _ = run(["check", "--set", "samples=50"], capsys)
    assert code == EXIT_OK
    assert out.count(",1\n") == 4


def test_top_level_check_flag(capsys):
    code, out, _ = run(["--check"], capsys)
    assert code == EXIT_OK and "distill_success_prob" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qubitamp", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "qubitamp" in proc.stdout
