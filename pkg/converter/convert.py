#!/usr/bin/env python3
"""Convert citation-network benchmark dumps to the portable graph format.

Reads the pickled split files that graph-learning libraries distribute for
Cora, Citeseer, and Pubmed (ind.<name>.x / y / tx / ty / allx / ally /
graph / test.index) and emits a portable graph directory:

    meta.json, features.bin, edges.csv, labels.csv, splits.json

plus a manifest.json with counts and file checksums. Counts are validated
against the published statistics of the three datasets; a mismatch means a
corrupt source and aborts the conversion.

Usage:  convert.py <cora|citeseer|pubmed> <source_dir> <out_dir>

Only numpy and scipy are required; no deep-learning framework is imported.
"""

from __future__ import annotations

import hashlib
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

EXPECTED = {
    "cora": {"n": 2708, "d": 1433, "M": 7, "directed_edges": 10556},
    "citeseer": {"n": 3327, "d": 3703, "M": 6, "directed_edges": 9104},
    "pubmed": {"n": 19717, "d": 500, "M": 3, "directed_edges": 88648},
}

SPLIT_FILES = ("x", "y", "tx", "ty", "allx", "ally", "graph", "test.index")


class ConversionError(RuntimeError):
    pass


def _read_pickle(path: Path):
    if not path.is_file():
        raise ConversionError(f"missing source file: {path}")
    with path.open("rb") as f:
        return pickle.load(f, encoding="latin1")


def _dense(mat) -> np.ndarray:
    if sp.issparse(mat):
        return np.asarray(mat.todense(), dtype=np.float32)
    return np.asarray(mat, dtype=np.float32)


def load_planetoid(name: str, source_dir) -> dict:
    """Assemble the full node/feature/label/edge arrays from a split dump.

    Test-set feature rows are stored in the file order of test.index; ids
    inside the test range that the index never lists (Citeseer has a few)
    become zero-feature, label-free padding nodes.
    """
    src = Path(source_dir)
    objs = {key: _read_pickle(src / f"ind.{name}.{key}")
            for key in SPLIT_FILES if key not in ("test.index",)}
    index_path = src / f"ind.{name}.test.index"
    if not index_path.is_file():
        raise ConversionError(f"missing source file: {index_path}")
    test_idx = [int(line) for line in index_path.read_text().split()]

    allx = _dense(objs["allx"])
    tx = _dense(objs["tx"])
    ally = np.asarray(objs["ally"])
    ty = np.asarray(objs["ty"])
    n_known = allx.shape[0]
    d = allx.shape[1]
    M = ally.shape[1]
    if min(test_idx) < n_known:
        raise ConversionError("test index overlaps the training block")
    n = max(test_idx) + 1

    features = np.zeros((n, d), dtype=np.float32)
    features[:n_known] = allx
    onehot = np.zeros((n, M))
    onehot[:n_known] = ally
    if len(test_idx) != tx.shape[0]:
        raise ConversionError(
            f"test.index lists {len(test_idx)} ids but tx has {tx.shape[0]} rows")
    for row, node in enumerate(test_idx):
        features[node] = tx[row]
        onehot[node] = ty[row]

    graph = objs["graph"]
    pairs = set()
    for node, neighbours in graph.items():
        for other in neighbours:
            a, b = int(node), int(other)
            if a == b:
                continue
            if not (0 <= a < n and 0 <= b < n):
                raise ConversionError(f"edge endpoint {max(a, b)} out of range")
            pairs.add((min(a, b), max(a, b)))
    edges = sorted(pairs)

    n_train = np.asarray(objs["y"]).shape[0]
    labelled = np.flatnonzero(onehot.sum(axis=1) > 0)
    labels = {int(i): int(onehot[i].argmax()) for i in labelled}
    test_sorted = sorted(test_idx)
    observed = list(range(n_train))
    in_test = set(test_sorted)
    unobserved = [i for i in range(n) if i >= n_train and i not in in_test]
    return {
        "name": name, "n": n, "d": d, "M": M,
        "features": features, "edges": edges, "labels": labels,
        "observed": observed, "unobserved": unobserved, "test": test_sorted,
    }


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def write_portable(data: dict, out_dir) -> dict:
    """Emit the portable graph directory; returns per-file checksums."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(
        json.dumps({"name": data["name"], "n": data["n"], "d": data["d"],
                    "M": data["M"]}, sort_keys=True) + "\n")
    np.asarray(data["features"], dtype="<f4").tofile(out / "features.bin")
    with (out / "edges.csv").open("w") as f:
        for a, b in data["edges"]:
            f.write(f"{a},{b}\n")
    with (out / "labels.csv").open("w") as f:
        for node in sorted(data["labels"]):
            f.write(f"{node},{data['labels'][node]}\n")
    (out / "splits.json").write_text(json.dumps(
        {"observed": data["observed"], "unobserved": data["unobserved"],
         "test": data["test"]}, sort_keys=True) + "\n")
    names = ("meta.json", "features.bin", "edges.csv", "labels.csv", "splits.json")
    return {name: _sha256(out / name) for name in names}


def convert(dataset_name: str, source_dir, out_dir) -> dict:
    """Convert one dataset; returns (and writes) the conversion manifest."""
    name = dataset_name.lower()
    if name not in EXPECTED:
        raise ConversionError(
            f"unknown dataset name {dataset_name!r}; expected one of {sorted(EXPECTED)}")
    data = load_planetoid(name, source_dir)
    expected = EXPECTED[name]
    counts = {
        "n": data["n"], "d": data["d"], "M": data["M"],
        "undirected_pairs": len(data["edges"]),
        "directed_edges": 2 * len(data["edges"]),
    }
    for key in ("n", "d", "M", "directed_edges"):
        if counts[key] != expected[key]:
            raise ConversionError(
                f"corrupt source: {name} {key} is {counts[key]}, "
                f"expected {expected[key]}")
    checksums = write_portable(data, out_dir)
    feats = data["features"].astype(np.float64)
    manifest = {
        "dataset": name,
        "counts": counts,
        "feature_std": float(feats.std()),
        "observed": len(data["observed"]),
        "unobserved": len(data["unobserved"]),
        "test": len(data["test"]),
        "checksums": checksums,
    }
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 3:
        print(__doc__.strip().splitlines()[-3].strip(), file=sys.stderr)
        return 2
    try:
        manifest = convert(argv[0], argv[1], argv[2])
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    counts = manifest["counts"]
    print(f"{manifest['dataset']}: n={counts['n']} d={counts['d']} "
          f"M={counts['M']} undirected_pairs={counts['undirected_pairs']} "
          f"directed_edges={counts['directed_edges']} "
          f"feature_std={manifest['feature_std']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
