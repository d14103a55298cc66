import json
import stat

import pytest
from click.testing import CliRunner

from conftest import DATA
from pufkeys.cli import main
from test_crpstore import golden_database_text

SCENARIO = """\
seed: 11
topology:
  mode: {mode}
  users: {users}
  db_size: 16
script:
  - {{op: establish, a: {a}, b: {b}, repeat: 2}}
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_scenario(tmp_path, mode="star", users=("alice", "bob", "charlie"), a="kdc", b="alice", extra=""):
    path = tmp_path / "scenario.yaml"
    path.write_text(SCENARIO.format(mode=mode, users="[" + ", ".join(users) + "]", a=a, b=b) + extra)
    return path


@pytest.mark.parametrize("mode, users, dbs", [("star", 3, 3), ("full_mesh", 4, 6)])
def test_provision_writes_one_file_per_database(runner, tmp_path, mode, users, dbs):
    names = [f"u{i}" for i in range(users)]
    cfg = write_scenario(tmp_path, mode, names, "u0", "u1")
    out = tmp_path / "state"
    result = runner.invoke(main, ["--out", str(out), "provision", str(cfg)])
    assert result.exit_code == 0, result.output
    assert f"databases {dbs} (expected {dbs})" in result.output
    assert len(list((out / "databases").glob("*.crpdb"))) == dbs
    assert stat.S_IMODE((out / "tokens.json").stat().st_mode) == 0o600
    manifest = json.loads((out / "manifest.json").read_text())
    assert "disorder_seed" not in (out / "manifest.json").read_text()
    assert manifest["counts"]["databases"] == dbs


def test_run_writes_log_and_metrics(runner, tmp_path):
    cfg = write_scenario(tmp_path)
    out = tmp_path / "run"
    result = runner.invoke(main, ["--out", str(out), "run", str(cfg)])
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[:4] == ["sessions 2", "keys_established 2", "aborts {}", "adversary_success 0"]
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["keys_established"] == 2
    assert (out / "events.log").read_text().startswith("0 | net | scenario | - | seed=11 mode=star")


def test_run_is_reproducible_and_seed_overridable(runner, tmp_path):
    cfg = write_scenario(tmp_path)
    logs = []
    for seed, name in ((None, "a"), (None, "b"), (5, "c")):
        args = ["--out", str(tmp_path / name)] + (["--seed", str(seed)] if seed is not None else []) + ["run", str(cfg)]
        assert runner.invoke(main, args).exit_code == 0
        logs.append((tmp_path / name / "events.log").read_bytes())
    assert logs[0] == logs[1] != logs[2]


def test_run_against_provisioned_state(runner, tmp_path):
    cfg = write_scenario(tmp_path, extra="state: state\n")
    assert runner.invoke(main, ["--out", str(tmp_path / "state"), "provision", str(cfg)]).exit_code == 0
    result = runner.invoke(main, ["--out", str(tmp_path / "run"), "run", str(cfg)])
    assert result.exit_code == 0, result.output
    assert "keys_established 2" in result.output
    # the state on disk is left untouched
    db_file = next((tmp_path / "state" / "databases").glob("kdc*alice*.crpdb"))
    assert "\nC " not in db_file.read_text()


def test_in_simulation_aborts_still_exit_zero(runner, tmp_path):
    cfg = write_scenario(tmp_path, extra="  - {op: qkd, a: alice, b: bob}\n")
    result = runner.invoke(main, ["--out", str(tmp_path / "run"), "run", str(cfg)])
    assert result.exit_code == 0
    assert 'aborts {"PoolDepleted": 1}' in result.output


def test_configuration_errors_exit_2(runner, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("topology: {mode: ring, users: [a, b]}\n")
    result = runner.invoke(main, ["run", str(path)])
    assert result.exit_code == 2
    assert "line 1: topology.mode" in result.output


def test_corrupt_database_exits_3(runner, tmp_path):
    path = tmp_path / "broken.crpdb"
    path.write_text("CRPDB1 demo alice bob 256\nE 01 zz\n")
    result = runner.invoke(main, ["audit", str(path)])
    assert result.exit_code == 3
    assert "line 2" in result.output


def test_missing_file_exits_4(runner, tmp_path):
    result = runner.invoke(main, ["audit", str(tmp_path / "absent.crpdb")])
    assert result.exit_code == 4


def test_audit_prints_the_golden_report(runner, tmp_path):
    path = tmp_path / "demo.crpdb"
    path.write_text(golden_database_text())
    result = runner.invoke(main, ["audit", str(path)])
    assert result.exit_code == 0
    assert result.output == (DATA / "audit_golden.txt").read_text()


def test_audit_of_a_provisioned_database(runner, tmp_path):
    cfg = write_scenario(tmp_path)
    runner.invoke(main, ["--out", str(tmp_path / "state"), "provision", str(cfg)])
    db_file = next((tmp_path / "state" / "databases").glob("*.crpdb"))
    result = runner.invoke(main, ["audit", "--alpha", "0.05", str(db_file)])
    assert result.exit_code == 0
    assert "available 16" in result.output
    assert "consistency ok" in result.output
    assert "rng keys_tested 16" in result.output
