import json

import numpy as np
import pytest

from drgl import (
    DatasetFormatError,
    Graph,
    LabelSet,
    feature_std,
    load_graph,
    normalize_adjacency,
    save_graph,
)


def test_single_node_graph_is_valid():
    g = Graph(n=1, d=1, features=np.zeros((1, 1), dtype=np.float32), edges=[])
    assert g.undirected_pairs == 0
    assert normalize_adjacency(g).matrix.toarray().tolist() == [[1.0]]


def test_two_nodes_one_edge_normalization():
    g = Graph(n=2, d=1, features=np.zeros((2, 1), dtype=np.float32), edges=[(0, 1)])
    mat = normalize_adjacency(g).matrix.toarray()
    assert mat == pytest.approx(np.full((2, 2), 0.5))


def test_path_graph_normalization(path_graph):
    mat = normalize_adjacency(path_graph).matrix.toarray()
    # degrees with self-loops: 2, 3, 2
    assert mat[0, 1] == pytest.approx(1.0 / np.sqrt(6.0), abs=1e-12)
    assert mat[1, 2] == pytest.approx(1.0 / np.sqrt(6.0), abs=1e-12)
    assert mat[0, 0] == pytest.approx(0.5)
    assert mat[1, 1] == pytest.approx(1.0 / 3.0)


def test_normalization_exactly_symmetric():
    rng = np.random.default_rng(0)
    n = 40
    edges = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(120, 2)) if a != b}
    g = Graph(n=n, d=1, features=np.zeros((n, 1), dtype=np.float32), edges=list(edges))
    mat = normalize_adjacency(g).matrix.toarray()
    assert np.array_equal(mat, mat.T)
    nz = mat[mat != 0]
    assert (nz > 0).all() and (nz <= 1.0).all()


def test_k_regular_offdiagonal_weights():
    # 6-cycle is 2-regular: off-diagonal nonzeros must all be 1/3
    n = 6
    edges = [(i, (i + 1) % n) for i in range(n)]
    g = Graph(n=n, d=1, features=np.zeros((n, 1), dtype=np.float32), edges=edges)
    mat = normalize_adjacency(g).matrix.toarray()
    off = mat[~np.eye(n, dtype=bool)]
    assert off[off != 0] == pytest.approx(np.full(2 * n, 1.0 / 3.0))


def test_edge_canonicalization_and_validation():
    g = Graph(n=3, d=1, features=np.zeros((3, 1), dtype=np.float32),
              edges=[(1, 0), (0, 1), (2, 1)])
    assert g.edges.tolist() == [[0, 1], [1, 2]]
    with pytest.raises(DatasetFormatError, match="out of range"):
        Graph(n=3, d=1, features=np.zeros((3, 1), dtype=np.float32), edges=[(0, 3)])
    with pytest.raises(DatasetFormatError, match="self-loop"):
        Graph(n=3, d=1, features=np.zeros((3, 1), dtype=np.float32), edges=[(1, 1)])
    with pytest.raises(DatasetFormatError, match="non-finite"):
        Graph(n=1, d=1, features=np.array([[np.nan]], dtype=np.float32), edges=[])


def test_feature_std_values(path_graph):
    g = Graph(n=2, d=1, features=np.array([[0.0], [2.0]], dtype=np.float32), edges=[(0, 1)])
    assert feature_std(g) == pytest.approx(1.0)
    const = Graph(n=3, d=2, features=np.full((3, 2), 4.0, dtype=np.float32), edges=[])
    assert feature_std(const) == 0.0
    single = Graph(n=1, d=1, features=np.zeros((1, 1), dtype=np.float32), edges=[])
    with pytest.raises(ValueError):
        feature_std(single)


def test_load_roundtrip(tiny_dataset, tmp_path):
    root, g, labels = tiny_dataset
    g2, l2 = load_graph(root)
    assert g2.n == g.n and g2.d == g.d
    assert np.array_equal(g2.features, g.features)
    assert np.array_equal(g2.edges, g.edges)
    assert l2.M == labels.M
    assert sorted(l2.observed) == sorted(labels.observed)
    assert sorted(l2.test) == sorted(labels.test)
    # binary feature block round-trips bit-exactly
    again = tmp_path / "again"
    save_graph(again, g2, l2)
    assert (again / "features.bin").read_bytes() == (root / "features.bin").read_bytes()
    assert (again / "edges.csv").read_bytes() == (root / "edges.csv").read_bytes()


def test_load_missing_file(tmp_path):
    with pytest.raises(DatasetFormatError, match="missing file"):
        load_graph(tmp_path / "nowhere")


def test_load_accepts_csv_features(tiny_dataset):
    root, g, _ = tiny_dataset
    (root / "features.bin").unlink()
    np.savetxt(root / "features.csv", g.features, delimiter=",")
    g2, _ = load_graph(root)
    assert np.allclose(g2.features, g.features)


def test_load_malformed_header(tiny_dataset):
    root, _, _ = tiny_dataset
    (root / "meta.json").write_text(json.dumps({"name": "x", "n": 10}))
    with pytest.raises(DatasetFormatError, match="malformed header"):
        load_graph(root)


def test_load_edge_out_of_range(tiny_dataset):
    root, g, _ = tiny_dataset
    with (root / "edges.csv").open("a") as f:
        f.write(f"0,{g.n}\n")
    with pytest.raises(DatasetFormatError, match="out of range"):
        load_graph(root)


def test_load_class_absent(tiny_dataset):
    root, _, _ = tiny_dataset
    splits = json.loads((root / "splits.json").read_text())
    splits["observed"] = [0, 1]          # both class 0; class 1 vanishes
    splits["unobserved"] = [2, 3, 4, 5]
    (root / "splits.json").write_text(json.dumps(splits))
    with pytest.raises(DatasetFormatError, match="class absent"):
        load_graph(root)


def test_labelset_disjointness():
    with pytest.raises(DatasetFormatError, match="disjoint"):
        LabelSet(M=1, observed=[(0, 0)], unobserved=[0], test=[]).validate(2)
