"""Stage-two classifiers over frozen embeddings, plus entropy-based UQ.

Four predictors share the PredictionSet output type: a dense softmax head
trained on observed embeddings, an inverse-distance weighted k-NN, a kernel
density estimate over the least-favorable-distribution weights, and a label
propagation baseline that ignores features entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import Embeddings
from .graph import LabelSet, NormalizedAdjacency
from .lfd import LfdSolution
from .rng import stream
from .training import Adam

_KNN_EPS = 1e-8


def entropy(p) -> float:
    """Natural-log entropy of a probability vector, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def entropy_rows(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=1)


@dataclass
class PredictionSet:
    """Per-node class probabilities, argmax labels, and entropies.

    Ties in the argmax resolve to the lowest class index. flagged lists nodes
    whose probabilities had to fall back to uniform (no signal reached them).
    """

    nodes: np.ndarray
    probs: np.ndarray
    predicted: np.ndarray = None
    entropy: np.ndarray = None
    flagged: tuple = ()

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[0] != self.nodes.size:
            raise ValueError("probs must be (len(nodes), M)")
        if (self.probs < -1e-9).any():
            raise ValueError("negative probability")
        if np.abs(self.probs.sum(axis=1) - 1.0).max(initial=0.0) > 1e-6:
            raise ValueError("probability rows must sum to 1")
        if self.predicted is None:
            self.predicted = self.probs.argmax(axis=1).astype(np.int64)
        if self.entropy is None:
            self.entropy = entropy_rows(self.probs)

    @property
    def M(self) -> int:
        return self.probs.shape[1]

    def accuracy(self, truth: dict) -> float:
        """Percent of nodes whose prediction matches truth[node]."""
        hits = [int(self.predicted[k]) == truth[int(node)]
                for k, node in enumerate(self.nodes)]
        return 100.0 * float(np.mean(hits))

    def to_csv(self) -> str:
        header = "node,predicted," + ",".join(f"p_{m}" for m in range(self.M)) + ",entropy"
        lines = [header]
        for k, node in enumerate(self.nodes):
            probs = ",".join(repr(float(v)) for v in self.probs[k])
            lines.append(f"{int(node)},{int(self.predicted[k])},{probs},{self.entropy[k]!r}")
        return "\n".join(lines) + "\n"


@dataclass
class SoftmaxHead:
    """Two-layer dense classifier h -> h2 -> M with softmax output."""

    V1: np.ndarray
    b1: np.ndarray
    V2: np.ndarray
    b2: np.ndarray

    def logits(self, xi: np.ndarray) -> np.ndarray:
        hidden = np.maximum(np.asarray(xi, dtype=np.float64) @ self.V1 + self.b1, 0.0)
        return hidden @ self.V2 + self.b2

    def predict_proba(self, xi: np.ndarray) -> np.ndarray:
        z = self.logits(xi)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, xi: np.ndarray, nodes=None) -> PredictionSet:
        xi = np.asarray(xi, dtype=np.float64)
        nodes = np.arange(xi.shape[0]) if nodes is None else nodes
        return PredictionSet(nodes=nodes, probs=self.predict_proba(xi))


def init_head(h: int, M: int, hidden: int = 16, seed: int = 0) -> SoftmaxHead:
    rng = stream(seed, "softmax-head")
    lim1 = np.sqrt(6.0 / (h + hidden))
    lim2 = np.sqrt(6.0 / (hidden + M))
    return SoftmaxHead(
        V1=rng.uniform(-lim1, lim1, size=(h, hidden)),
        b1=np.zeros(hidden),
        V2=rng.uniform(-lim2, lim2, size=(hidden, M)),
        b2=np.zeros(M),
    )


def train_softmax_head(xi, labels: LabelSet, epochs: int = 500, lr: float = 1e-2,
                       seed: int = 0, hidden: int = 16) -> SoftmaxHead:
    """Full-batch Adam on cross-entropy over the observed nodes.

    xi holds frozen embeddings for the whole graph (Embeddings or array);
    only observed rows enter the loss. Deterministic given seed.
    """
    mat = xi.matrix if isinstance(xi, Embeddings) else np.asarray(xi, dtype=np.float64)
    obs = np.array(labels.observed_nodes, dtype=np.int64)
    y = np.array([y for _, y in labels.observed], dtype=np.int64)
    X = mat[obs]
    M = labels.M
    head = init_head(mat.shape[1], M, hidden=hidden, seed=seed)
    if epochs == 0:
        return head
    onehot = np.zeros((obs.size, M))
    onehot[np.arange(obs.size), y] = 1.0
    adam = Adam([head.V1.shape, head.b1.shape, head.V2.shape, head.b2.shape], lr)
    for _ in range(epochs):
        hidden_act = np.maximum(X @ head.V1 + head.b1, 0.0)
        z = hidden_act @ head.V2 + head.b2
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(np.maximum(probs[np.arange(obs.size), y], 1e-300)))
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite cross-entropy loss")
        d_z = (probs - onehot) / obs.size
        dV2 = hidden_act.T @ d_z
        db2 = d_z.sum(axis=0)
        d_hidden = (d_z @ head.V2.T) * (hidden_act > 0)
        dV1 = X.T @ d_hidden
        db1 = d_hidden.sum(axis=0)
        new = adam.step([head.V1, head.b1, head.V2, head.b2], [dV1, db1, dV2, db2])
        head = SoftmaxHead(V1=new[0], b1=new[1], V2=new[2], b2=new[3])
    return head


def knn_predict(xi_train: np.ndarray, labels_train: np.ndarray,
                xi_query: np.ndarray, k: int = 5, M: int | None = None,
                query_nodes=None) -> PredictionSet:
    """Inverse-distance weighted k-nearest-neighbour class probabilities.

    Class scores sum 1/(d + 1e-8) over the k nearest training points of each
    class and are normalized to a probability vector. Distance ties resolve
    by training index.
    """
    xi_train = np.asarray(xi_train, dtype=np.float64)
    xi_query = np.asarray(xi_query, dtype=np.float64)
    labels_train = np.asarray(labels_train, dtype=np.int64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > xi_train.shape[0]:
        raise ValueError(f"k={k} exceeds {xi_train.shape[0]} training points")
    M = int(labels_train.max()) + 1 if M is None else M
    d2 = ((xi_query[:, None, :] - xi_train[None, :, :]) ** 2).sum(axis=2)
    dist = np.sqrt(d2)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    probs = np.zeros((xi_query.shape[0], M))
    for q in range(xi_query.shape[0]):
        idx = order[q]
        w = 1.0 / (dist[q, idx] + _KNN_EPS)
        np.add.at(probs[q], labels_train[idx], w)
        probs[q] /= probs[q].sum()
    nodes = np.arange(xi_query.shape[0]) if query_nodes is None else query_nodes
    return PredictionSet(nodes=nodes, probs=probs)


def silverman_bandwidth(xi: np.ndarray) -> float:
    """Scalar bandwidth: mean-variance scale times (4 / ((d+2) n))^(1/(d+4))."""
    xi = np.asarray(xi, dtype=np.float64)
    n, d = xi.shape
    sigma = float(np.sqrt(xi.var(axis=0).mean()))
    if sigma == 0.0 or n < 2:
        return 1.0
    return sigma * (4.0 / ((d + 2.0) * n)) ** (1.0 / (d + 4.0))


def kde_lfd_predict(sol: LfdSolution, xi_support: np.ndarray, xi_query: np.ndarray,
                    bandwidth: float | None = None, query_nodes=None) -> PredictionSet:
    """Gaussian-kernel class scores over the least-favorable weights.

    f_m(q) = sum_j weights[m, j] * exp(-|q - xi_j|^2 / (2 b^2)), normalized
    across classes; rows with no mass in reach fall back to uniform and are
    flagged.
    """
    xi_support = np.asarray(xi_support, dtype=np.float64)
    xi_query = np.asarray(xi_query, dtype=np.float64)
    if bandwidth is None:
        bandwidth = silverman_bandwidth(xi_support)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    d2 = ((xi_query[:, None, :] - xi_support[None, :, :]) ** 2).sum(axis=2)
    kern = np.exp(-d2 / (2.0 * bandwidth**2))
    scores = kern @ sol.weights.T                      # (n_query, M)
    totals = scores.sum(axis=1)
    M = sol.weights.shape[0]
    flagged = np.flatnonzero(totals <= 0.0)
    probs = np.where(totals[:, None] > 0.0, scores / np.where(totals[:, None] > 0, totals[:, None], 1.0),
                     1.0 / M)
    nodes = np.arange(xi_query.shape[0]) if query_nodes is None else np.asarray(query_nodes)
    return PredictionSet(nodes=nodes, probs=probs,
                         flagged=tuple(int(nodes[i]) for i in flagged))


def label_propagation(a_hat: NormalizedAdjacency, labels: LabelSet,
                      iterations: int = 50) -> PredictionSet:
    """Propagate one-hot observed labels through the renormalized adjacency.

    Observed rows are re-clamped after every step; final rows are normalized
    to probabilities. Nodes no signal ever reached get uniform rows and are
    flagged.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = a_hat.n
    M = labels.M
    Y = np.zeros((n, M))
    obs = np.array(labels.observed_nodes, dtype=np.int64)
    y_obs = np.array([y for _, y in labels.observed], dtype=np.int64)
    clamp = np.zeros((obs.size, M))
    clamp[np.arange(obs.size), y_obs] = 1.0
    Y[obs] = clamp
    for _ in range(iterations):
        Y = a_hat.dot(Y)
        Y[obs] = clamp
    totals = Y.sum(axis=1)
    flagged = np.flatnonzero(totals <= 0.0)
    probs = np.where(totals[:, None] > 0.0,
                     Y / np.where(totals[:, None] > 0, totals[:, None], 1.0),
                     1.0 / M)
    return PredictionSet(nodes=np.arange(n), probs=probs,
                         flagged=tuple(int(i) for i in flagged))
