import json
import os
import subprocess
import sys

import pytest

from mcx import __version__, cli

COMMANDS = {
    "simulate-graph": ["--n", "50", "--replicas", "3", "--walk"],
    "simulate-limit": ["--replicas", "2", "--t", "0.5", "--c", "1", "--walk"],
    "uribe": ["--masses", "2,1,1", "--s", "0.3", "--replicas", "4"],
    "verify-exact": ["--masses", "1,1,1", "--s", "0.3", "--replicas", "20000"],
    "convergence": ["--n-list", "100,200", "--replicas", "40"],
}


def run(tmp_path, name, args, fmt="csv", tag="a"):
    out = tmp_path / f"{name}-{tag}.{fmt}"
    code = cli.main([name, *args, "--seed", "7", "--format", fmt, "--out", str(out)])
    return code, out


@pytest.mark.parametrize("name", sorted(COMMANDS))
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_rerun_is_byte_identical(tmp_path, name, fmt):
    c1, o1 = run(tmp_path, name, COMMANDS[name], fmt, "a")
    c2, o2 = run(tmp_path, name, COMMANDS[name], fmt, "b")
    assert c1 == c2
    assert c1 in (0, 3)
    assert o1.read_bytes() == o2.read_bytes()
    side = sorted(p.name.split(".", 1)[1] for p in tmp_path.iterdir() if p.name.startswith(f"{name}-a."))
    for suffix in side:
        assert (tmp_path / f"{name}-a.{suffix}").read_bytes() == (tmp_path / f"{name}-b.{suffix}").read_bytes()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".mcx-")]


def test_header_records_scenario_and_version(tmp_path):
    _, out = run(tmp_path, "uribe", COMMANDS["uribe"])
    first = out.read_text().splitlines()[0]
    meta = json.loads(first[2:])
    assert meta["version"] == __version__
    assert meta["scenario"]["seed"] == 7
    assert meta["scenario"]["masses"] == [2.0, 1.0, 1.0]
    _, out = run(tmp_path, "uribe", COMMANDS["uribe"], "json")
    assert json.loads(out.read_text())["header"]["version"] == __version__


def test_jobs_do_not_change_output(tmp_path):
    args = ["--n", "80", "--replicas", "6"]
    c1, o1 = run(tmp_path, "simulate-graph", args + ["--jobs", "1"], tag="one")
    c2, o2 = run(tmp_path, "simulate-graph", args + ["--jobs", "3"], tag="three")
    assert o1.read_bytes() == o2.read_bytes()


def test_verify_exact_passes(tmp_path, capsys):
    code, out = run(tmp_path, "verify-exact", ["--n", "3", "--masses", "1,1,1", "--s", "0.3", "--replicas", "100000"], "json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["verdict"] == "pass"
    assert {r[0] for r in doc["rows"]} == {"gillespie", "uribe", "bfw"}
    assert "seed=7" in capsys.readouterr().out


def test_single_block_graph(tmp_path):
    code, out = run(tmp_path, "simulate-graph", ["--n", "1", "--masses", "1.0"])
    assert code == 0
    rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert rows == ["replica,rank,mass", "0,0,1.0"]


def test_config_file(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"n": 40, "kappa": 1.0, "t": 0.5, "c": [1.0], "l": 1, "threshold": 0.2}))
    code, out = run(tmp_path, "simulate-graph", ["--config", str(cfg)], "json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["header"]["scenario"]["c"] == [1.0]
    assert doc["report"]["blocks"] == 41


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate-graph"],
        ["uribe", "--masses", "1,x"],
        ["verify-exact", "--masses", "1,1", "--replicas", "0"],
        ["simulate-limit", "--kappa", "0"],
        ["simulate-graph", "--n", "3", "--masses", "1,1"],
        ["bogus"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_module_error_exit_1(tmp_path, capsys):
    code = cli.main(["verify-exact", "--masses", ",".join(["1"] * 12), "--out", str(tmp_path / "x.csv")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_entry_point_subprocess_is_deterministic(tmp_path):
    outs = []
    for tag in "ab":
        out = tmp_path / f"{tag}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "mcx.cli", "uribe", "--masses", "1,1", "--replicas", "3", "--seed", "3", "--out", str(out)],
            capture_output=True,
            text=True,
            env={**os.environ, "MCX_JOBS": "2"},
        )
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
