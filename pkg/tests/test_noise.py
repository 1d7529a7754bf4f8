import numpy as np
import pytest

from drgl import Graph, NoiseSpec, add_feature_noise, feature_std, remove_edges


def big_graph(n=1000, d=100, seed=3):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, d)).astype(np.float32)
    edges = [(i, i + 1) for i in range(n - 1)]
    return Graph(n=n, d=d, features=feats, edges=edges, name="big")


def test_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(sigma_multiplier=-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(edge_removal_rate=1.0)


def test_zero_sigma_bit_identical(path_graph):
    out = add_feature_noise(path_graph, NoiseSpec(sigma_multiplier=0.0, seed=1))
    assert np.array_equal(out.features, path_graph.features)
    assert out.features.tobytes() == path_graph.features.tobytes()


def test_noise_determinism(path_graph):
    spec = NoiseSpec(sigma_multiplier=1.0, seed=42)
    a = add_feature_noise(path_graph, spec)
    b = add_feature_noise(path_graph, spec)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.edges, path_graph.edges)


def test_noise_scale_matches_request():
    g = big_graph()
    base = feature_std(g)
    for mult in (0.5, 1.0, 2.0):
        out = add_feature_noise(g, NoiseSpec(sigma_multiplier=mult, seed=11))
        delta = out.features.astype(np.float64) - g.features.astype(np.float64)
        assert np.std(delta) == pytest.approx(mult * base, rel=0.02)


def test_different_seeds_differ():
    g = big_graph(n=50, d=4)
    outs = [add_feature_noise(g, NoiseSpec(sigma_multiplier=1.0, seed=s)).features
            for s in range(100)]
    distinct = 0
    for a, b in zip(outs, outs[1:]):
        distinct += int(not np.array_equal(a, b))
    assert distinct >= 98
    removed = [remove_edges(g, NoiseSpec(edge_removal_rate=0.5, seed=s)).edges.tobytes()
               for s in range(100)]
    assert len(set(removed)) >= 99


def test_remove_edges_counts():
    g = big_graph(n=11, d=2)          # 10 edges
    assert g.undirected_pairs == 10
    kept = remove_edges(g, NoiseSpec(edge_removal_rate=0.5, seed=5))
    assert kept.undirected_pairs == 5
    same = remove_edges(g, NoiseSpec(edge_removal_rate=0.0, seed=5))
    assert np.array_equal(same.edges, g.edges)
    # exact floor arithmetic and subset property on a bigger graph
    g2 = big_graph(n=500, d=2)
    out = remove_edges(g2, NoiseSpec(edge_removal_rate=0.2, seed=9))
    assert out.undirected_pairs == g2.undirected_pairs - int(0.2 * g2.undirected_pairs)
    in_set = {tuple(e) for e in g2.edges.tolist()}
    assert all(tuple(e) in in_set for e in out.edges.tolist())
    assert np.array_equal(out.features, g2.features)


def test_remove_edges_determinism():
    g = big_graph(n=100, d=2)
    spec = NoiseSpec(edge_removal_rate=0.35, seed=77)
    a = remove_edges(g, spec)
    b = remove_edges(g, spec)
    assert np.array_equal(a.edges, b.edges)
