"""CLI dispatch: subcommands, exit codes, output layout."""

import json

import pytest

from nse_mdp.cli import cli_dispatch

SMALL = """
[basis]
n = 3
[grid]
t = 0.3
n_steps = 30
[estimates]
n = 3
samples = 300
[ensemble]
replicas = 10
[scaling]
eps = 0.1, 0.01
[prop33]
n_steps = 400
[tail]
replicas = 500
n_steps = 20
eps = 0.1, 0.03
radius = 1.5
directions_random = 2
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return str(p)


def test_verify_core(tmp_path, cfg_file, capsys):
    out = str(tmp_path / "res")
    assert cli_dispatch(["verify-core", "--config", cfg_file, "--out", out]) == 0
    assert (tmp_path / "res" / "estimates.csv").exists()
    text = capsys.readouterr().out
    assert "PASS" in text


def test_missing_config_exits_2(tmp_path):
    code = cli_dispatch(["verify-core", "--config", "/nonexistent.cfg",
                         "--out", str(tmp_path)])
    assert code == 2


def test_unknown_flag_exits_2(tmp_path, cfg_file):
    assert cli_dispatch(["verify-core", "--config", cfg_file,
                         "--out", str(tmp_path), "--bogus"]) == 2


def test_unknown_command_exits_2(tmp_path):
    assert cli_dispatch(["frobnicate", "--out", str(tmp_path)]) == 2


def test_bad_config_key_exits_2(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[basis]\nwhatever = 3\n")
    assert cli_dispatch(["simulate", "--config", str(p),
                         "--out", str(tmp_path / "o")]) == 2


def test_simulate_writes_snapshots(tmp_path, cfg_file):
    out = tmp_path / "sim"
    assert cli_dispatch(["simulate", "--config", cfg_file, "--out", str(out)]) == 0
    assert (out / "trajectories" / "u_eps_0.bin").exists()
    assert (out / "trajectories" / "u_eps_1.bin").exists()
    assert (out / "simulate.csv").exists()
    man = json.loads((out / "simulate_manifest.json").read_text())
    assert "jumps_per_eps" in man["diagnostics"]


def test_skeleton_and_rate_pipeline(tmp_path, cfg_file):
    out = tmp_path / "sk"
    assert cli_dispatch(["skeleton", "--config", cfg_file, "--out", str(out)]) == 0
    snap = out / "trajectories" / "skeleton.bin"
    assert snap.exists()
    rout = tmp_path / "rate"
    assert cli_dispatch(["rate", "--config", cfg_file, "--out", str(rout),
                         "--target", str(snap)]) == 0
    res = json.loads((rout / "rate_result.json").read_text())
    assert res["I"] > 0
    assert res["converged"]
    assert res["residual"] <= 1e-7
    psi_lines = (rout / "psi_star.csv").read_text().splitlines()
    assert psi_lines[0] == "mark_index,step,value"
    assert len(psi_lines) == 1 + 2 * 30


def test_rate_default_target(tmp_path, cfg_file):
    rout = tmp_path / "rate2"
    assert cli_dispatch(["rate", "--config", cfg_file, "--out", str(rout)]) == 0
    assert (rout / "rate_result.json").exists()


def test_seed_override_changes_hash(tmp_path, cfg_file):
    out1 = tmp_path / "s1"
    out2 = tmp_path / "s2"
    assert cli_dispatch(["simulate", "--config", cfg_file, "--out", str(out1)]) == 0
    assert cli_dispatch(["simulate", "--config", cfg_file, "--out", str(out2),
                         "--seed", "42"]) == 0
    m1 = json.loads((out1 / "simulate_manifest.json").read_text())
    m2 = json.loads((out2 / "simulate_manifest.json").read_text())
    assert m1["config_hash"] != m2["config_hash"]
    assert m2["diagnostics"]["seed"] == 42


def test_experiment_commands_and_report_data(tmp_path, cfg_file):
    out = tmp_path / "res"
    assert cli_dispatch(["thm35", "--config", cfg_file, "--out", str(out)]) in (0, 1)
    assert cli_dispatch(["prop33", "--config", cfg_file, "--out", str(out)]) in (0, 1)
    assert (out / "thm35.csv").exists()
    assert (out / "prop33.csv").exists()
    assert cli_dispatch(["report-data", "--in", str(out)]) == 0
    idx = json.loads((out / "index.json").read_text())
    assert {e["experiment"] for e in idx["experiments"]} == {"thm35", "prop33"}


def test_report_data_empty_dir_exits_2(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli_dispatch(["report-data", "--in", str(empty)]) == 2


def test_report_data_mixed_hashes_exit_2(tmp_path, cfg_file):
    out = tmp_path / "mix"
    assert cli_dispatch(["verify-core", "--config", cfg_file, "--out", str(out)]) == 0
    assert cli_dispatch(["thm35", "--config", cfg_file, "--out", str(out),
                         "--seed", "31415"]) in (0, 1)
    assert cli_dispatch(["report-data", "--in", str(out)]) == 2


def test_csv_determinism_through_cli(tmp_path, cfg_file):
    a = tmp_path / "runA"
    b = tmp_path / "runB"
    for out in (a, b):
        assert cli_dispatch(["prop36", "--config", cfg_file,
                             "--out", str(out)]) in (0, 1)
    assert (a / "prop36.csv").read_bytes() == (b / "prop36.csv").read_bytes()
