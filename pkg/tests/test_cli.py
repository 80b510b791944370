"""Run and verify subcommands, exit codes, and trace rechecking."""

import json
from importlib import resources
from pathlib import Path

import pytest

from umtslab.cli import build_algorithm, main


def write_config(path: Path, **overrides) -> Path:
    config = {
        "schema": "umtslab-run-v1",
        "seeds": [0],
        "spaces": [
            {"name": "u3", "kind": "uniform", "points": 3, "rates": [2.0, 1.0, 0.5], "s": 1.0}
        ],
        "algorithms": ["combined"],
        "adversaries": [{"kind": "uniform-random", "steps": 20, "max_fraction": 0.999}],
    }
    config.update(overrides)
    target = path / "config.json"
    target.write_text(json.dumps(config))
    return target


def read_tree(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_deterministic_runs_are_byte_identical(tmp_path):
    config = write_config(tmp_path, seeds=[0, 1])
    out1, out2 = tmp_path / "out1", tmp_path / "out2"
    assert main(["run", str(config), "--deterministic", "--out", str(out1)]) == 0
    assert main(["run", str(config), "--deterministic", "--out", str(out2)]) == 0
    tree1, tree2 = read_tree(out1), read_tree(out2)
    assert set(tree1) == set(tree2)
    assert all(tree1[name] == tree2[name] for name in tree1)
    assert "results.csv" in tree1 and "summary.json" in tree1


def test_parallel_run_matches_serial(tmp_path):
    config = write_config(
        tmp_path,
        seeds=[0, 1],
        spaces=[{"name": "u2", "kind": "uniform", "points": 2, "rates": [3.0, 1.0]}],
        algorithms=["trivial", "two-stable"],
        adversaries=[{"kind": "greedy-pressure", "steps": 15}],
    )
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert main(["run", str(config), "--out", str(serial)]) == 0
    assert main(["run", str(config), "--jobs", "2", "--out", str(parallel)]) == 0
    assert read_tree(serial) == read_tree(parallel)


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": "other"}))
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    mismatched = write_config(tmp_path, algorithms=["caching"])
    assert main(["run", str(mismatched), "--out", str(tmp_path / "o")]) == 2
    capsys.readouterr()


def test_seed_env_overrides_config(tmp_path, monkeypatch):
    config = write_config(tmp_path, seeds=[0, 1, 2], algorithms=["trivial"])
    monkeypatch.setenv("UMTSLAB_SEED", "5")
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [row["seed"] for row in summary["rows"]] == [5]
    monkeypatch.setenv("UMTSLAB_SEED", "x")
    assert main(["run", str(config), "--out", str(out)]) == 2


def test_zero_step_runs_report_no_ratio(tmp_path):
    config = write_config(
        tmp_path,
        algorithms=["trivial"],
        adversaries=[{"kind": "uniform-random", "steps": 0}],
    )
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rows"][0]["ratio"] is None
    csv_text = (out / "results.csv").read_text().splitlines()
    assert csv_text[1].split(",")[7] == "nan"


def test_verify_accepts_written_traces(tmp_path, capsys):
    config = write_config(tmp_path, algorithms=["combined", "trivial"])
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    traces = sorted((out / "traces").glob("*.jsonl"))
    assert len(traces) == 2
    for trace in traces:
        assert main(["verify", str(trace)]) == 0
    assert "ok:" in capsys.readouterr().out


def test_verify_flags_corrupted_quotient_charge(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    trace = next((out / "traces").glob("*combined*.jsonl"))
    lines = trace.read_text().splitlines()
    row = json.loads(lines[10])
    row["delta_hat"] += 0.01
    lines[10] = json.dumps(row, sort_keys=True)
    doctored = tmp_path / "doctored.jsonl"
    doctored.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(doctored)]) == 1
    message = capsys.readouterr().out
    assert "hatw violated at step 10" in message


def test_verify_flags_corrupted_work_function(tmp_path, capsys):
    config = write_config(
        tmp_path,
        spaces=[{"name": "u2", "kind": "uniform", "points": 2, "rates": [3.0, 1.0]}],
        algorithms=["two-stable"],
    )
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    trace = next((out / "traces").glob("*.jsonl"))
    lines = trace.read_text().splitlines()
    row = json.loads(lines[5])
    row["w"][0] += 0.5
    lines[5] = json.dumps(row, sort_keys=True)
    trace.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(trace)]) == 1
    assert "welleqw violated at step 5" in capsys.readouterr().out


def test_verify_empty_and_malformed(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["verify", str(empty)]) == 0
    assert main(["verify", str(tmp_path / "missing.jsonl")]) == 2
    headless = tmp_path / "headless.jsonl"
    headless.write_text(json.dumps({"kind": "step", "i": 1}) + "\n")
    assert main(["verify", str(headless)]) == 2
    capsys.readouterr()


def test_bundled_configs_are_valid():
    for name in ("uniform-oddexponent.json", "caching-k3.json"):
        text = resources.files("umtslab").joinpath(f"configs/{name}").read_text()
        config = json.loads(text)
        assert config["schema"] == "umtslab-run-v1"
        for space in config["spaces"]:
            for algorithm in config["algorithms"]:
                alg = build_algorithm(space, algorithm)
                assert alg.declared_ratio > 0
