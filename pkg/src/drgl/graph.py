"""Graph data model, portable on-disk format, and propagation-matrix construction.

A dataset is a directory with:

    meta.json       {"name": str, "n": int, "d": int, "M": int}
    features.bin    little-endian float32, row-major, n*d values
                    (features.csv is accepted as an alternative on load)
    edges.csv       one "src,dst" pair per line, 0-based node indices
    labels.csv      one "node,label" pair per line for every labelled node
    splits.json     {"observed": [...], "unobserved": [...], "test": [...]}

Features are stored dense in float32; edges are stored once per undirected
pair, canonicalized to (min, max) order, deduplicated and sorted.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    """A portable graph directory violates the on-disk contract."""


def _canonical_edges(edges, n: int) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise DatasetFormatError(
            f"edge endpoint out of range: endpoints must lie in [0, {n})"
        )
    if np.any(e[:, 0] == e[:, 1]):
        raise DatasetFormatError("self-loop in edge list")
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    e = np.unique(np.stack([lo, hi], axis=1), axis=0) if e.size else e.reshape(0, 2)
    return e


@dataclass
class Graph:
    """An undirected attributed graph.

    features: (n, d) float32 matrix of node attributes.
    edges:    (E, 2) int64 array of undirected pairs, i < j, deduplicated.

    Immutable after construction; safe to share across threads.
    """

    n: int
    d: int
    features: np.ndarray
    edges: np.ndarray
    name: str = "graph"

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        if feats.shape != (self.n, self.d):
            raise DatasetFormatError(
                f"feature matrix shape {feats.shape} != ({self.n}, {self.d})"
            )
        if feats.size and not np.isfinite(feats).all():
            raise DatasetFormatError("non-finite value in feature matrix")
        edges = _canonical_edges(self.edges, self.n)
        feats.setflags(write=False)
        edges.setflags(write=False)
        self.features = feats
        self.edges = edges

    @property
    def undirected_pairs(self) -> int:
        return int(self.edges.shape[0])

    @property
    def directed_edges(self) -> int:
        return 2 * self.undirected_pairs


@dataclass
class LabelSet:
    """Label splits for semi-supervised node classification.

    observed holds (node, label) pairs available for training; unobserved and
    test hold bare node indices. known_labels maps every labelled node to its
    ground-truth class and is what held-out scoring reads.
    """

    M: int
    observed: list = field(default_factory=list)
    unobserved: list = field(default_factory=list)
    test: list = field(default_factory=list)
    known_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.observed = [(int(i), int(y)) for i, y in self.observed]
        self.unobserved = [int(i) for i in self.unobserved]
        self.test = [int(i) for i in self.test]
        self.known_labels = {int(i): int(y) for i, y in self.known_labels.items()}
        for i, y in self.observed:
            self.known_labels.setdefault(i, y)

    @property
    def observed_nodes(self) -> list:
        return [i for i, _ in self.observed]

    def validate(self, n: int) -> None:
        if self.M < 1:
            raise DatasetFormatError("class count must be >= 1")
        obs = set(self.observed_nodes)
        uno = set(self.unobserved)
        tst = set(self.test)
        for name, idx in (("observed", obs), ("unobserved", uno), ("test", tst)):
            bad = [i for i in idx if not 0 <= i < n]
            if bad:
                raise DatasetFormatError(
                    f"split index out of range in {name}: node {bad[0]} not in [0, {n})"
                )
        if obs & uno or obs & tst or uno & tst:
            raise DatasetFormatError("observed/unobserved/test splits must be disjoint")
        labels = {y for _, y in self.observed}
        if any(not 0 <= y < self.M for y in labels):
            raise DatasetFormatError("observed label outside [0, M)")
        missing = sorted(set(range(self.M)) - labels)
        if missing:
            raise DatasetFormatError(
                f"class absent from observed set: class {missing[0]} has no observed node"
            )
        for i, y in self.known_labels.items():
            if not 0 <= i < n:
                raise DatasetFormatError(f"labelled node {i} out of range")
            if not 0 <= y < self.M:
                raise DatasetFormatError(f"label {y} for node {i} outside [0, M)")
        for i, y in self.observed:
            if self.known_labels[i] != y:
                raise DatasetFormatError(
                    f"observed label for node {i} conflicts with known label"
                )


@dataclass
class NormalizedAdjacency:
    """Symmetric renormalized propagation matrix D^(-1/2) (A + I) D^(-1/2).

    Stored nonzero entries all lie in (0, 1]; the matrix is exactly symmetric
    by construction. Immutable after construction.
    """

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dot(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """Renormalized propagation weights with self-loops added.

    Each undirected pair gets weight 1/sqrt(deg_i * deg_j) in both directions
    and every node a self-weight 1/deg_i, where deg counts neighbours plus the
    self-loop. Isolated nodes come out with self-weight exactly 1.
    """
    n = g.n
    deg = np.ones(n, dtype=np.float64)
    if g.edges.size:
        np.add.at(deg, g.edges[:, 0], 1.0)
        np.add.at(deg, g.edges[:, 1], 1.0)
    inv_sqrt = 1.0 / np.sqrt(deg)
    rows = [np.arange(n), ]
    cols = [np.arange(n), ]
    vals = [1.0 / deg, ]
    if g.edges.size:
        i, j = g.edges[:, 0], g.edges[:, 1]
        w = inv_sqrt[i] * inv_sqrt[j]
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([w, w])
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return NormalizedAdjacency(mat)


def feature_std(g: Graph) -> float:
    """Population standard deviation of all n*d feature entries pooled."""
    if g.n * g.d < 2:
        raise ValueError("feature_std needs at least two feature entries")
    return float(np.std(np.asarray(g.features, dtype=np.float64)))


def _read_pairs_csv(path: Path, what: str) -> np.ndarray:
    rows = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DatasetFormatError(f"{what}:{lineno}: expected two fields, got {line!r}")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError:
                if lineno == 1:
                    continue  # tolerate a header line
                raise DatasetFormatError(f"{what}:{lineno}: non-integer field in {line!r}")
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def load_graph(path) -> tuple[Graph, LabelSet]:
    """Load a portable graph directory, validating every invariant.

    Raises DatasetFormatError with a distinct diagnostic per failure mode:
    missing file, malformed header, index out of range, class absent from
    the observed set.
    """
    root = Path(path)
    meta_path = root / "meta.json"
    if not root.is_dir() or not meta_path.is_file():
        raise DatasetFormatError(f"missing file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        name = str(meta["name"])
        n, d, M = int(meta["n"]), int(meta["d"]), int(meta["M"])
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetFormatError(f"malformed header in {meta_path}: {exc}") from exc
    if n < 1 or d < 1 or M < 1:
        raise DatasetFormatError(f"malformed header in {meta_path}: n, d, M must be >= 1")

    bin_path = root / "features.bin"
    csv_path = root / "features.csv"
    if bin_path.is_file():
        raw = np.fromfile(bin_path, dtype="<f4")
        if raw.size != n * d:
            raise DatasetFormatError(
                f"features.bin holds {raw.size} values, expected n*d = {n * d}"
            )
        feats = raw.reshape(n, d)
    elif csv_path.is_file():
        feats = np.loadtxt(csv_path, delimiter=",", dtype=np.float32).reshape(n, d)
    else:
        raise DatasetFormatError(f"missing file: {bin_path} (or features.csv)")

    edges_path = root / "edges.csv"
    if not edges_path.is_file():
        raise DatasetFormatError(f"missing file: {edges_path}")
    edges = _read_pairs_csv(edges_path, "edges.csv")

    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise DatasetFormatError(f"missing file: {labels_path}")
    label_pairs = _read_pairs_csv(labels_path, "labels.csv")

    splits_path = root / "splits.json"
    if not splits_path.is_file():
        raise DatasetFormatError(f"missing file: {splits_path}")
    try:
        splits = json.loads(splits_path.read_text(encoding="utf-8"))
        observed_idx = [int(i) for i in splits["observed"]]
        unobserved_idx = [int(i) for i in splits["unobserved"]]
        test_idx = [int(i) for i in splits["test"]]
    except (KeyError, ValueError, TypeError) as exc:
        raise DatasetFormatError(f"malformed splits.json: {exc}") from exc

    g = Graph(n=n, d=d, features=feats, edges=edges, name=name)

    known = {}
    for node, label in label_pairs:
        if not 0 <= node < n:
            raise DatasetFormatError(f"labels.csv: node {node} out of range [0, {n})")
        if not 0 <= label < M:
            raise DatasetFormatError(f"labels.csv: label {label} outside [0, {M})")
        known[int(node)] = int(label)

    try:
        observed = [(i, known[i]) for i in observed_idx]
    except KeyError as exc:
        raise DatasetFormatError(f"observed node {exc.args[0]} has no label in labels.csv")
    labels = LabelSet(
        M=M,
        observed=observed,
        unobserved=unobserved_idx,
        test=test_idx,
        known_labels=known,
    )
    labels.validate(n)
    # The source corpus may count citation edges per direction; record both
    # conventions so downstream reports are unambiguous.
    log.info(
        "loaded %s: n=%d d=%d M=%d undirected_pairs=%d directed_edges=%d",
        name, n, d, M, g.undirected_pairs, g.directed_edges,
    )
    return g, labels


def save_graph(path, g: Graph, labels: LabelSet) -> None:
    """Write a graph and label splits in the portable directory format."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "meta.json").write_text(
        json.dumps({"name": g.name, "n": g.n, "d": g.d, "M": labels.M}, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    np.asarray(g.features, dtype="<f4").tofile(root / "features.bin")
    with (root / "edges.csv").open("w", encoding="utf-8") as f:
        for i, j in g.edges:
            f.write(f"{i},{j}\n")
    with (root / "labels.csv").open("w", encoding="utf-8") as f:
        for node in sorted(labels.known_labels):
            f.write(f"{node},{labels.known_labels[node]}\n")
    (root / "splits.json").write_text(
        json.dumps(
            {
                "observed": sorted(labels.observed_nodes),
                "unobserved": sorted(labels.unobserved),
                "test": sorted(labels.test),
            },
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
