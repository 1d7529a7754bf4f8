"""Converter tests against synthesized split dumps with the published counts.

Real benchmark dumps are not bundled; set DRGL_PLANETOID_DIR to a directory
holding the ind.* files to also exercise the genuine datasets.
"""

import json
import os
import pickle
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from convert import EXPECTED, ConversionError, convert, load_planetoid

CONVERT_PY = Path(__file__).resolve().parents[1] / "convert.py"


def synth_dump(name, out_dir, rng, n_train=None, n_val=500, missing_test=0):
    """Write a split dump with exactly the published counts for `name`."""
    spec = EXPECTED[name]
    n, d, M = spec["n"], spec["d"], spec["M"]
    pairs_target = spec["directed_edges"] // 2
    n_test_listed = 1000
    span = n_test_listed + missing_test
    n_known = n - span
    n_train = n_train if n_train is not None else 20 * M

    def sparse_rows(rows):
        mat = sp.random(rows, d, density=min(0.01, 2000 / (rows * d)),
                        random_state=np.random.RandomState(0), format="csr",
                        dtype=np.float32)
        mat.data[:] = 1.0
        return mat

    def onehot(count, offset=0):
        y = np.zeros((count, M), dtype=np.int32)
        y[np.arange(count), (np.arange(count) + offset) % M] = 1
        return y

    allx = sparse_rows(n_known)
    x = allx[:n_train]
    ally = onehot(n_known)
    y = ally[:n_train]

    listed = rng.choice(span, size=n_test_listed, replace=False) + n_known
    listed = [int(v) for v in listed]
    # file order is shuffled relative to sorted ids
    tx = sparse_rows(n_test_listed)
    ty = onehot(n_test_listed, offset=1)

    pairs = set()
    while len(pairs) < pairs_target:
        draw = rng.integers(0, n, size=(pairs_target - len(pairs) + 64, 2))
        for a, b in draw:
            if a != b:
                pairs.add((int(min(a, b)), int(max(a, b))))
            if len(pairs) == pairs_target:
                break
    graph = {i: [] for i in range(n)}
    for a, b in pairs:
        graph[a].append(b)
        graph[b].append(a)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"x": x, "y": y, "tx": tx, "ty": ty, "allx": allx, "ally": ally,
               "graph": graph}
    for key, obj in payload.items():
        with (out / f"ind.{name}.{key}").open("wb") as f:
            pickle.dump(obj, f)
    (out / f"ind.{name}.test.index").write_text(
        "\n".join(str(v) for v in listed) + "\n")
    return listed, tx


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(99)


def test_cora_shaped_conversion(tmp_path, rng):
    listed, tx = synth_dump("cora", tmp_path / "src", rng)
    manifest = convert("cora", tmp_path / "src", tmp_path / "out")
    assert manifest["counts"] == {"n": 2708, "d": 1433, "M": 7,
                                  "undirected_pairs": 5278,
                                  "directed_edges": 10556}
    # test features land on the nodes listed in file order
    feats = np.fromfile(tmp_path / "out" / "features.bin", dtype="<f4")
    feats = feats.reshape(2708, 1433)
    dense_tx = np.asarray(tx.todense(), dtype=np.float32)
    for row in (0, 17, 999):
        assert np.array_equal(feats[listed[row]], dense_tx[row])


def test_citeseer_shaped_conversion_with_padding(tmp_path, rng):
    synth_dump("citeseer", tmp_path / "src", rng, missing_test=15)
    manifest = convert("citeseer", tmp_path / "src", tmp_path / "out")
    assert manifest["counts"]["n"] == 3327
    assert manifest["counts"]["directed_edges"] == 9104
    splits = json.loads((tmp_path / "out" / "splits.json").read_text())
    assert len(splits["test"]) == 1000
    # padded ids remain unlabelled but inside the graph
    labels = (tmp_path / "out" / "labels.csv").read_text().splitlines()
    assert len(labels) == 3327 - 15


def test_pubmed_shaped_conversion(tmp_path, rng):
    synth_dump("pubmed", tmp_path / "src", rng)
    manifest = convert("pubmed", tmp_path / "src", tmp_path / "out")
    assert manifest["counts"] == {"n": 19717, "d": 500, "M": 3,
                                  "undirected_pairs": 44324,
                                  "directed_edges": 88648}


def test_roundtrip_through_graph_loader(tmp_path, rng):
    # the portable directory is the interface contract with the main package
    drgl = pytest.importorskip("drgl")
    synth_dump("cora", tmp_path / "src", rng)
    manifest = convert("cora", tmp_path / "src", tmp_path / "out")
    g, labels = drgl.load_graph(tmp_path / "out")
    assert g.n == manifest["counts"]["n"]
    assert g.d == manifest["counts"]["d"]
    assert labels.M == manifest["counts"]["M"]
    assert g.undirected_pairs == manifest["counts"]["undirected_pairs"]
    assert g.directed_edges == manifest["counts"]["directed_edges"]
    assert len(labels.observed) == manifest["observed"]
    assert len(labels.test) == manifest["test"]
    assert drgl.feature_std(g) == pytest.approx(manifest["feature_std"], abs=1e-6)


def test_script_invocation(tmp_path, rng):
    synth_dump("cora", tmp_path / "src", rng)
    result = subprocess.run(
        [sys.executable, str(CONVERT_PY), "cora", str(tmp_path / "src"),
         str(tmp_path / "out")],
        capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    assert "n=2708" in result.stdout
    assert (tmp_path / "out" / "manifest.json").is_file()


def test_unknown_dataset_rejected(tmp_path):
    with pytest.raises(ConversionError, match="unknown dataset"):
        convert("karate", tmp_path, tmp_path / "out")
    result = subprocess.run(
        [sys.executable, str(CONVERT_PY), "karate", str(tmp_path), str(tmp_path / "o")],
        capture_output=True, text=True)
    assert result.returncode == 1
    assert "unknown dataset" in result.stderr


def test_corrupt_source_rejected(tmp_path, rng):
    synth_dump("cora", tmp_path / "src", rng)
    # drop an edge: counts no longer match the published statistics
    graph_path = tmp_path / "src" / "ind.cora.graph"
    graph = pickle.loads(graph_path.read_bytes())
    for node, neigh in graph.items():
        if neigh:
            other = neigh.pop()
            graph[other].remove(node)
            break
    graph_path.write_bytes(pickle.dumps(graph))
    with pytest.raises(ConversionError, match="corrupt source"):
        convert("cora", tmp_path / "src", tmp_path / "out")


def test_missing_source_file(tmp_path):
    with pytest.raises(ConversionError, match="missing source file"):
        load_planetoid("cora", tmp_path)


@pytest.mark.parametrize("name", ["cora", "citeseer", "pubmed"])
def test_real_dumps_if_available(name, tmp_path):
    src = os.environ.get("DRGL_PLANETOID_DIR")
    if not src or not (Path(src) / f"ind.{name}.x").is_file():
        pytest.skip("real benchmark dumps not available")
    manifest = convert(name, src, tmp_path / name)
    assert manifest["counts"]["n"] == EXPECTED[name]["n"]
    assert manifest["counts"]["d"] == EXPECTED[name]["d"]
    assert manifest["counts"]["M"] == EXPECTED[name]["M"]
    assert manifest["counts"]["directed_edges"] == EXPECTED[name]["directed_edges"]
