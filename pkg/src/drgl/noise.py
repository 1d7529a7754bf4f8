"""Seeded corruption of a clean graph: Gaussian feature noise and edge removal.

Both operations are pure functions of (graph, spec) and reproduce exactly for
a given seed; see rng for the pinned generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, feature_std
from .rng import stream


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption parameters.

    sigma_multiplier expresses the Gaussian noise level in units of the
    pooled feature standard deviation; edge_removal_rate is the fraction of
    undirected pairs dropped.
    """

    sigma_multiplier: float = 0.0
    edge_removal_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_multiplier < 0:
            raise ValueError("sigma_multiplier must be >= 0")
        if not 0.0 <= self.edge_removal_rate < 1.0:
            raise ValueError("edge_removal_rate must lie in [0, 1)")


def add_feature_noise(g: Graph, spec: NoiseSpec) -> Graph:
    """Add i.i.d. Gaussian noise with std sigma_multiplier * feature_std(g).

    Edges are untouched. sigma_multiplier == 0 returns the features
    bit-identical. Noisy features are not clipped to the non-negative range
    of bag-of-words inputs: clipping would change the noise scale.
    """
    if spec.sigma_multiplier == 0.0:
        return Graph(n=g.n, d=g.d, features=g.features, edges=g.edges, name=g.name)
    sigma = spec.sigma_multiplier * feature_std(g)
    rng = stream(spec.seed, "feature-noise")
    noisy = g.features.astype(np.float64) + rng.normal(0.0, sigma, size=(g.n, g.d))
    assert np.isfinite(noisy).all(), "feature noise produced non-finite values"
    return Graph(n=g.n, d=g.d, features=noisy.astype(np.float32), edges=g.edges, name=g.name)


def remove_edges(g: Graph, spec: NoiseSpec) -> Graph:
    """Remove exactly floor(rate * |edges|) undirected pairs uniformly.

    Sampling is without replacement; features are untouched; the surviving
    edge set is a subset of the input in its original order.
    """
    n_remove = int(np.floor(spec.edge_removal_rate * g.undirected_pairs))
    if n_remove == 0:
        return Graph(n=g.n, d=g.d, features=g.features, edges=g.edges, name=g.name)
    rng = stream(spec.seed, "edge-removal")
    drop = rng.choice(g.undirected_pairs, size=n_remove, replace=False)
    keep = np.ones(g.undirected_pairs, dtype=bool)
    keep[drop] = False
    return Graph(n=g.n, d=g.d, features=g.features, edges=g.edges[keep], name=g.name)
