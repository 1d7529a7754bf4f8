import numpy as np
import pytest

from drgl import Graph, LabelSet, save_graph


@pytest.fixture
def path_graph():
    """Three nodes in a path 0-1-2 with simple features."""
    feats = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]], dtype=np.float32)
    return Graph(n=3, d=2, features=feats, edges=[(0, 1), (1, 2)], name="path3")


@pytest.fixture
def tiny_dataset(tmp_path):
    """A small valid dataset directory on disk."""
    rng = np.random.default_rng(7)
    n, d, M = 10, 4, 2
    feats = rng.normal(size=(n, d)).astype(np.float32)
    edges = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (7, 8), (8, 9), (0, 9)]
    g = Graph(n=n, d=d, features=feats, edges=edges, name="tiny")
    truth = {0: 0, 1: 0, 2: 1, 3: 1, 4: 0, 5: 1, 6: 1, 7: 0, 8: 1, 9: 0}
    labels = LabelSet(
        M=M,
        observed=[(0, 0), (1, 0), (2, 1), (3, 1)],
        unobserved=[4, 5],
        test=[6, 7, 8, 9],
        known_labels=truth,
    )
    root = tmp_path / "tiny"
    save_graph(root, g, labels)
    return root, g, labels
