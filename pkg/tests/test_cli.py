import json
import subprocess
import sys

import pytest

from drgl import sbm_graph, save_graph
from drgl.cli import EXIT_CONFIG


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "sbm"
    g, labels = sbm_graph(n=60, classes=2, p_intra=0.2, p_inter=0.02,
                          feature_dim=4, feature_shift=1.0, seed=0)
    save_graph(root, g, labels)
    return root


def base_config(dataset):
    return {"dataset": str(dataset), "shots": 3, "repetitions": 2,
            "train": {"epochs": 2, "learning_rate": 1e-3,
                      "dro": {"radius_fraction": 0.3}},
            "classifier": {"kind": "knn", "k": 3}}


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "drgl.cli", *args],
                          capture_output=True, text=True)


def test_eval_writes_run_directory(dataset, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(dataset)))
    out = tmp_path / "run"
    result = run_cli("eval", "--config", str(cfg_path), "--out", str(out))
    assert result.returncode == 0, result.stderr
    names = {p.name for p in out.iterdir()}
    assert {"config.json", "report.jsonl", "table.csv", "table.md",
            "checkpoint.bin", "timings.jsonl"} <= names
    report = [json.loads(line) for line in
              (out / "report.jsonl").read_text().splitlines()]
    assert report[0]["record"] == "run_meta"
    assert report[-1]["record"] == "summary"


def test_eval_byte_identical_reruns(dataset, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(dataset)))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli("eval", "--config", str(cfg_path), "--out", str(out1)).returncode == 0
    assert run_cli("eval", "--config", str(cfg_path), "--out", str(out2)).returncode == 0
    assert (out1 / "table.csv").read_bytes() == (out2 / "table.csv").read_bytes()
    assert (out1 / "report.jsonl").read_bytes() == (out2 / "report.jsonl").read_bytes()


def test_train_writes_checkpoint(dataset, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(dataset)))
    out = tmp_path / "train"
    result = run_cli("train", "--config", str(cfg_path), "--out", str(out))
    assert result.returncode == 0, result.stderr
    assert (out / "checkpoint.bin").read_bytes()[:8] == b"GCNWGT01"


def test_export_viz(dataset, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg = base_config(dataset)
    cfg["classifier"] = {"kind": "softmax", "head_epochs": 30}
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "viz"
    result = run_cli("export-viz", "--config", str(cfg_path), "--out", str(out))
    assert result.returncode == 0, result.stderr
    head = (out / "viz.csv").read_text().splitlines()[0]
    assert head == "node,x,y,true,predicted,p_predicted,entropy,role"


def test_selftest_passes(tmp_path):
    result = run_cli("selftest", "--out", str(tmp_path / "self"))
    assert result.returncode == 0, result.stderr
    assert "[PASS]" in result.stdout and "[FAIL]" not in result.stdout
    body = json.loads((tmp_path / "self" / "selftest.json").read_text())
    assert body["passed"] is True


def test_missing_config_exits_2(tmp_path):
    result = run_cli("eval", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "o"))
    assert result.returncode == EXIT_CONFIG


def test_invalid_config_exits_2(dataset, tmp_path):
    cfg = base_config(dataset)
    cfg["mode"] = "bogus"
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps(cfg))
    result = run_cli("eval", "--config", str(cfg_path), "--out", str(tmp_path / "o"))
    assert result.returncode == EXIT_CONFIG


def test_missing_dataset_exits_2(dataset, tmp_path):
    cfg = base_config(dataset)
    cfg["dataset"] = str(tmp_path / "missing")
    cfg_path = tmp_path / "missing.json"
    cfg_path.write_text(json.dumps(cfg))
    result = run_cli("eval", "--config", str(cfg_path), "--out", str(tmp_path / "o"))
    assert result.returncode == EXIT_CONFIG
