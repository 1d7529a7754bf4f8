"""Synthetic benchmark graphs: stochastic block models with shifted features.

Used by the self-test, the test suite, and as a desk-scale stand-in for the
citation benchmarks. Class c gets mean feature vector with +shift/2 on the
coordinates congruent to c modulo the feature dimension pattern and -shift/2
elsewhere pairwise, so consecutive classes sit shift*sqrt(d) apart.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph, LabelSet
from .rng import stream


def sbm_graph(n: int = 200, classes: int = 2, p_intra: float = 0.1,
              p_inter: float = 0.01, feature_dim: int = 8,
              feature_shift: float = 1.0, observed_fraction: float = 0.5,
              seed: int = 0, name: str = "sbm") -> tuple[Graph, LabelSet]:
    """Sample a stochastic block model with class-shifted Gaussian features.

    Nodes are assigned to near-equal contiguous blocks. The observed pool and
    test split are stratified per class by observed_fraction; every node is
    labelled.
    """
    if classes < 2:
        raise ValueError("need at least two classes")
    rng = stream(seed, "sbm")
    block = np.array([c * n // classes for c in range(classes + 1)])
    y = np.zeros(n, dtype=np.int64)
    for c in range(classes):
        y[block[c]: block[c + 1]] = c

    same = y[:, None] == y[None, :]
    prob = np.where(same, p_intra, p_inter)
    coin = rng.random((n, n))
    upper = np.triu(coin < prob, k=1)
    src, dst = np.nonzero(upper)
    edges = np.stack([src, dst], axis=1)

    means = np.full((classes, feature_dim), -feature_shift / 2.0)
    for c in range(classes):
        means[c, np.arange(feature_dim) % classes == c] = feature_shift / 2.0
    feats = means[y] + rng.normal(0.0, 1.0, size=(n, feature_dim))

    observed, test = [], []
    for c in range(classes):
        members = np.flatnonzero(y == c)
        members = members[rng.permutation(members.size)]
        cut = max(1, int(round(observed_fraction * members.size)))
        observed.extend(int(i) for i in members[:cut])
        test.extend(int(i) for i in members[cut:])

    g = Graph(n=n, d=feature_dim, features=feats.astype(np.float32),
              edges=edges, name=name)
    labels = LabelSet(
        M=classes,
        observed=[(i, int(y[i])) for i in sorted(observed)],
        unobserved=[],
        test=sorted(test),
        known_labels={int(i): int(y[i]) for i in range(n)},
    )
    labels.validate(n)
    return g, labels
