"""Two-layer graph-convolutional encoder with exact reverse-mode gradients.

Forward map for node embeddings:

    xi = A_hat @ relu(dropout(A_hat @ X @ W1)) @ W2

where A_hat is the renormalized propagation matrix. Dropout (inverted, mask
scaled by 1/keep) is applied only when training=True. All arithmetic runs in
float64; checkpoints store weights in float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import NormalizedAdjacency
from .rng import stream

_CKPT_MAGIC = b"GCNWGT01"


@dataclass
class EncoderParams:
    """Encoder weights. Treated as immutable during forward/backward."""

    W1: np.ndarray
    W2: np.ndarray
    dropout_rate: float = 0.5

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise ValueError("W1 and W2 must be matrices")
        if self.W1.shape[1] != self.W2.shape[0]:
            raise ValueError(
                f"hidden dims disagree: W1 is {self.W1.shape}, W2 is {self.W2.shape}"
            )
        if self.W2.shape[1] < 2:
            raise ValueError("embedding dimension must be >= 2")
        if not (np.isfinite(self.W1).all() and np.isfinite(self.W2).all()):
            raise ValueError("non-finite encoder weight")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    @property
    def h1(self) -> int:
        return self.W1.shape[1]

    @property
    def h(self) -> int:
        return self.W2.shape[1]


@dataclass
class Embeddings:
    """Node embeddings; row i corresponds to node nodes[i]."""

    matrix: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        if not np.isfinite(self.matrix).all():
            raise ValueError("non-finite embedding")


@dataclass
class Tape:
    """Cached activations from one forward pass; consumed by one backward."""

    params: EncoderParams
    a_hat: NormalizedAdjacency
    x64: np.ndarray
    pre_relu: np.ndarray
    hidden: np.ndarray
    drop_mask: np.ndarray | None
    keep: float
    consumed: bool = field(default=False)


@dataclass
class EncoderGrads:
    dW1: np.ndarray
    dW2: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.dW1**2) + np.sum(self.dW2**2)))


def init_encoder(d: int, h1: int, h: int, seed: int = 0,
                 dropout_rate: float = 0.5) -> EncoderParams:
    """Glorot-uniform initialized encoder, deterministic given seed."""
    if d < 1 or h1 < 1 or h < 2:
        raise ValueError(f"invalid encoder dims (d={d}, h1={h1}, h={h})")
    rng = stream(seed, "encoder-init")
    lim1 = np.sqrt(6.0 / (d + h1))
    lim2 = np.sqrt(6.0 / (h1 + h))
    W1 = rng.uniform(-lim1, lim1, size=(d, h1))
    W2 = rng.uniform(-lim2, lim2, size=(h1, h))
    return EncoderParams(W1=W1, W2=W2, dropout_rate=dropout_rate)


def forward(p: EncoderParams, a_hat: NormalizedAdjacency, x: np.ndarray,
            training: bool = False, seed: int = 0) -> tuple[Embeddings, Tape]:
    """Embed all nodes; returns embeddings plus the tape for backward.

    With training=False the result is a deterministic function of
    (params, graph); with training=True the dropout mask is drawn from the
    stream keyed by seed.
    """
    x = np.asarray(x)
    n = a_hat.n
    if x.ndim != 2 or x.shape[0] != n:
        raise ValueError(f"feature matrix shape {x.shape} does not match n={n}")
    if x.shape[1] != p.d:
        raise ValueError(f"feature dim {x.shape[1]} != encoder input dim {p.d}")
    x64 = x.astype(np.float64, copy=False)
    h1_act = a_hat.dot(x64 @ p.W1)
    keep = 1.0 - p.dropout_rate
    if training and p.dropout_rate > 0.0:
        mask = stream(seed, "dropout").random(h1_act.shape) < keep
        pre = h1_act * mask / keep
    else:
        mask = None
        pre = h1_act
    hidden = np.maximum(pre, 0.0)
    xi = a_hat.dot(hidden @ p.W2)
    emb = Embeddings(matrix=xi, nodes=np.arange(n))
    tape = Tape(params=p, a_hat=a_hat, x64=x64, pre_relu=pre,
                hidden=hidden, drop_mask=mask, keep=keep)
    return emb, tape


def backward(p: EncoderParams, tape: Tape, grad_xi: np.ndarray) -> EncoderGrads:
    """Exact gradients of <grad_xi, xi> w.r.t. W1 and W2.

    The tape must come from a forward pass over the same params object and
    may be consumed only once.
    """
    if tape.params is not p:
        raise ValueError("tape does not match these encoder params")
    if tape.consumed:
        raise ValueError("tape already consumed by a previous backward pass")
    grad_xi = np.asarray(grad_xi, dtype=np.float64)
    if grad_xi.shape != (tape.a_hat.n, p.h):
        raise ValueError(
            f"grad_xi shape {grad_xi.shape} != ({tape.a_hat.n}, {p.h})"
        )
    tape.consumed = True
    g2 = tape.a_hat.dot(grad_xi)            # A_hat is symmetric
    dW2 = tape.hidden.T @ g2
    d_hidden = g2 @ p.W2.T
    d_pre = d_hidden * (tape.pre_relu > 0.0)
    if tape.drop_mask is not None:
        d_pre = d_pre * tape.drop_mask / tape.keep
    dW1 = tape.x64.T @ tape.a_hat.dot(d_pre)
    return EncoderGrads(dW1=dW1, dW2=dW2)


def save_checkpoint(path, p: EncoderParams) -> None:
    """Write weights to the binary checkpoint format.

    Layout (little-endian): 8-byte magic "GCNWGT01"; uint32 d, h1, h;
    float64 dropout_rate; d*h1 float32 W1 values row-major; h1*h float32 W2
    values row-major.
    """
    Path(path).write_bytes(checkpoint_bytes(p))


def checkpoint_bytes(p: EncoderParams) -> bytes:
    header = _CKPT_MAGIC + struct.pack("<IIId", p.d, p.h1, p.h, p.dropout_rate)
    return (header
            + np.asarray(p.W1, dtype="<f4").tobytes()
            + np.asarray(p.W2, dtype="<f4").tobytes())


def load_checkpoint(path) -> EncoderParams:
    return params_from_checkpoint(Path(path).read_bytes())


def params_from_checkpoint(blob: bytes) -> EncoderParams:
    if blob[:8] != _CKPT_MAGIC:
        raise ValueError("not an encoder checkpoint (bad magic)")
    d, h1, h, rate = struct.unpack_from("<IIId", blob, 8)
    off = 8 + struct.calcsize("<IIId")
    w1_count, w2_count = d * h1, h1 * h
    w1 = np.frombuffer(blob, dtype="<f4", count=w1_count, offset=off).reshape(d, h1)
    off += 4 * w1_count
    w2 = np.frombuffer(blob, dtype="<f4", count=w2_count, offset=off).reshape(h1, h)
    return EncoderParams(W1=w1, W2=w2, dropout_rate=rate)
