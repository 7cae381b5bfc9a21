import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from fscalecp.cli import EXIT_DATA, EXIT_DIMENSION, EXIT_MISSING, main

TRAIN = ["--kinds", "logreg,gnb", "--folds", "3", "--max-instances", "300"]
EVAL = ["--groups", "3", "--per-group", "5", "--fractions", "0.1,0.2"]


def pipeline(threads: int = 1) -> None:
    """synth -> train (three variants) -> simulate -> evaluate -> report, with relative paths."""
    steps = [
        ["synth", "--nodes", "300", "--messages", "50", "--seed", "4", "--out", "data"],
        ["train", "--data", "data", "--seed", "1", "--out", "model.json"] + TRAIN,
        ["train", "--data", "data", "--variant", "lrcq1", "--folds", "3", "--max-instances", "300",
         "--out", "lrcq1.json"],
        ["train", "--data", "data", "--variant", "lrcq2", "--folds", "3", "--max-instances", "300",
         "--out", "lrcq2.json"],
        ["simulate", "--data", "data", "--model", "model.json", "--cascade", "m0", "--seed", "2",
         "--out", "pred.jsonl", "--trace", "trace.jsonl"],
        ["evaluate", "--data", "data", "--models", "model.json,lrcq1.json,lrcq2.json",
         "--experiment", "states,size,process", "--threads", str(threads), "--out", "results.csv"] + EVAL,
        ["report", "--results", "results.csv", "--models", "model.json,lrcq1.json", "--out", "report.json"],
    ]
    for argv in steps:
        assert main(argv) == 0, argv


def outputs(d: Path) -> dict[str, bytes]:
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def run_once(tmp_path_factory):
    d = tmp_path_factory.mktemp("a")
    cwd = Path.cwd()
    os.chdir(d)
    try:
        pipeline()
    finally:
        os.chdir(cwd)
    return d


def test_end_to_end_outputs(run_once):
    d = run_once
    model = json.loads((d / "model.json").read_text(encoding="utf-8"))
    assert model["variant"] == "fscalecp" and model["selected_names"]
    assert abs(sum(model["mechanism_measure"].values()) - 1) < 1e-9
    pred = [json.loads(line) for line in (d / "pred.jsonl").read_text(encoding="utf-8").splitlines()]
    assert pred and all(r["m"] == "m0" for r in pred)
    report = json.loads((d / "report.json").read_text(encoding="utf-8"))
    assert set(report) == {"contagion_state_accuracy", "process_accuracy_series", "size_precision_0.2", "models"}
    assert set(report["contagion_state_accuracy"]) == {"fscalecp", "lrcq1", "lrcq2"}
    assert "cg-cpred" in report["size_precision_0.2"]
    assert (d / "results.summary.json").exists() and (d / "data" / "planted.json").exists()


def test_rerun_is_byte_identical(run_once, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    pipeline()
    assert outputs(tmp_path) == outputs(run_once)


def test_threads_agree(run_once, tmp_path, monkeypatch):
    monkeypatch.chdir(run_once)
    out = tmp_path / "r8.csv"
    assert main(["evaluate", "--data", "data", "--models", "model.json,lrcq1.json,lrcq2.json",
                 "--experiment", "states,size,process", "--threads", "8", "--out", str(out)] + EVAL) == 0
    assert out.read_bytes() == (run_once / "results.csv").read_bytes()


def test_full_observation_zero_horizon_echoes_input(run_once, tmp_path, monkeypatch):
    monkeypatch.chdir(run_once)
    data = json.loads((run_once / "data" / "manifest.json").read_text(encoding="utf-8"))
    assert data["n_messages"] == 50
    truth = [line for line in (run_once / "data" / "cascades.jsonl").read_text(encoding="utf-8").splitlines()
             if json.loads(line)["m"] == "m3"]
    out = tmp_path / "echo.jsonl"
    assert main(["simulate", "--data", "data", "--model", "model.json", "--cascade", "m3",
                 "--observe-frac", "1.0", "--horizon", "0", "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8").splitlines() == truth


def test_unknown_flag_exits_2():
    proc = subprocess.run([sys.executable, "-m", "fscalecp.cli", "train", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr


def test_bad_experiment_name_is_usage_error(run_once):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--data", str(run_once / "data"), "--models", "x.json", "--experiment", "speed",
              "--out", "r.csv"])
    assert exc.value.code == 2


def test_missing_file(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "m.json")]) == EXIT_MISSING


def test_schema_mismatch(run_once, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "something-else"}), encoding="utf-8")
    assert main(["simulate", "--data", str(run_once / "data"), "--model", str(bad), "--cascade", "m0",
                 "--out", str(tmp_path / "p.jsonl")]) == EXIT_DATA


def test_invalid_data(tmp_path):
    d = tmp_path / "data"
    main(["synth", "--nodes", "30", "--messages", "3", "--out", str(d)])
    with open(d / "cascades.jsonl", "a", encoding="utf-8") as fh:
        fh.write('{"m": "m0", "v": "nobody", "t": 1.0}\n')
    assert main(["train", "--data", str(d), "--out", str(tmp_path / "m.json")]) == EXIT_DATA


def test_dimension_mismatch(run_once, tmp_path):
    model = json.loads((run_once / "model.json").read_text(encoding="utf-8"))
    model["feature_names"] = model["feature_names"][:-1]
    bad = tmp_path / "short.json"
    bad.write_text(json.dumps(model), encoding="utf-8")
    assert main(["simulate", "--data", str(run_once / "data"), "--model", str(bad), "--cascade", "m0",
                 "--out", str(tmp_path / "p.jsonl")]) == EXIT_DIMENSION
