"""Per-identity embeddings from biased random walks plus skip-gram training.

Walks are second-order biased (return parameter p, in-out parameter q) and
each walk draws from its own (seed, node, walk index) stream, so the corpus
does not depend on generation order. Training is skip-gram with negative
sampling over a frozen pair set, batched with numpy; everything is float64
and bitwise-reproducible for a fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphs import Graph


class EmbeddingFormatError(ValueError):
    """Malformed embedding file or matrix/graph misalignment."""


@dataclass
class WalkConfig:
    dim: int = 128
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    negatives_per_positive: int = 5
    epochs: int = 3
    learning_rate: float = 0.025
    return_param: float = 1.0
    inout_param: float = 1.0
    seed: int = 0
    batch_size: int = 256  # gradients are summed per batch; keep steps SGD-sized

    def validate(self) -> None:
        for name in ("dim", "walks_per_node", "walk_length", "window",
                     "negatives_per_positive", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.return_param <= 0 or self.inout_param <= 0:
            raise ValueError("return_param and inout_param must be positive")


@dataclass
class EmbeddingMatrix:
    """Row-per-identity vectors aligned with a graph's node order."""

    labels: list[str]
    rows: np.ndarray                  # (N, dim) float64
    norm_rows: np.ndarray = field(default=None, repr=False)
    pretrain_loss: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.labels):
            raise EmbeddingFormatError("row count must equal label count")
        norms = np.linalg.norm(self.rows, axis=1)
        if np.any(norms == 0.0):
            raise EmbeddingFormatError("zero embedding rows are not allowed")
        if not np.all(np.isfinite(self.rows)):
            raise EmbeddingFormatError("non-finite embedding values")
        if self.norm_rows is None:
            self.norm_rows = self.rows / norms[:, None]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def node_count(self) -> int:
        return self.rows.shape[0]

    def check_aligned(self, graph: Graph) -> None:
        if self.labels != graph.node_ids:
            raise EmbeddingFormatError("embedding labels do not match graph node order")


# ---------------------------------------------------------------------------
# random walks
# ---------------------------------------------------------------------------

def _one_walk(nbr_sets, nbr_arrays, start: int, length: int,
              p: float, q: float, rng: np.random.Generator) -> list[int]:
    walk = [start]
    unbiased = p == 1.0 and q == 1.0
    while len(walk) < length:
        cur = walk[-1]
        nbrs = nbr_arrays[cur]
        if nbrs.size == 0:
            break
        if unbiased or len(walk) == 1:
            nxt = int(nbrs[rng.integers(nbrs.size)])
        else:
            prev = walk[-2]
            prev_set = nbr_sets[prev]
            w = np.empty(nbrs.size)
            for idx, x in enumerate(nbrs):
                if x == prev:
                    w[idx] = 1.0 / p
                elif x in prev_set:
                    w[idx] = 1.0
                else:
                    w[idx] = 1.0 / q
            w /= w.sum()
            nxt = int(nbrs[rng.choice(nbrs.size, p=w)])
        walk.append(nxt)
    return walk


def generate_walks(graph: Graph, cfg: WalkConfig) -> list[list[int]]:
    """Walk corpus over node indices, one seeded stream per (node, repeat)."""
    nbr_arrays = [np.array(sorted(s), dtype=np.int64) for s in graph.neighbors]
    walks = []
    for node in range(graph.node_count):
        for rep in range(cfg.walks_per_node):
            rng = np.random.default_rng(
                np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, node, rep]))
            walks.append(_one_walk(graph.neighbors, nbr_arrays, node,
                                   cfg.walk_length, cfg.return_param,
                                   cfg.inout_param, rng))
    return walks


# ---------------------------------------------------------------------------
# skip-gram with negative sampling
# ---------------------------------------------------------------------------

def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = -np.log1p(np.exp(-x[pos]))
    out[~pos] = x[~pos] - np.log1p(np.exp(x[~pos]))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _scatter_add(acc: np.ndarray, idx: np.ndarray, grads: np.ndarray) -> None:
    """acc[idx[m]] += grads[m], duplicates accumulated."""
    n = acc.shape[0]
    if n <= 2048:
        onehot = np.zeros((idx.size, n))
        onehot[np.arange(idx.size), idx] = 1.0
        acc += onehot.T @ grads
    else:
        np.add.at(acc, idx, grads)


def _build_pairs(walks: Sequence[Sequence[int]], window: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for walk in walks:
        L = len(walk)
        if L < 2:
            continue
        spans = rng.integers(1, window + 1, size=L)
        for i in range(L):
            s = int(spans[i])
            for j in range(max(0, i - s), min(L, i + s + 1)):
                if j != i:
                    centers.append(walk[i])
                    contexts.append(walk[j])
    return (np.array(centers, dtype=np.int64),
            np.array(contexts, dtype=np.int64))


def pretrain_embeddings(graph: Graph, cfg: WalkConfig) -> EmbeddingMatrix:
    """Train identity vectors on the walk corpus; returns the input matrix.

    Isolated nodes see no walk context and end up with a seeded random unit
    vector instead (with a warning). The per-epoch mean loss is recorded on
    the result as ``pretrain_loss``.
    """
    if graph.node_count == 0:
        raise ValueError("cannot embed an empty graph")
    cfg.validate()
    n, d = graph.node_count, cfg.dim
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 0x5319]))

    walks = generate_walks(graph, cfg)
    centers, contexts = _build_pairs(walks, cfg.window, rng)

    U = rng.uniform(-0.5, 0.5, size=(n, d)) / d
    V = np.zeros((n, d))
    losses: list[float] = []

    if centers.size > 0:
        counts = np.bincount(np.concatenate([np.concatenate(
            [np.asarray(w) for w in walks]), np.arange(n)]), minlength=n).astype(np.float64)
        noise = counts ** 0.75
        noise /= noise.sum()
        k = cfg.negatives_per_positive
        negatives = rng.choice(n, size=(centers.size, k), p=noise)

        batches_per_epoch = int(np.ceil(centers.size / cfg.batch_size))
        total_batches = cfg.epochs * batches_per_epoch
        batch_no = 0
        for _ in range(cfg.epochs):
            order = rng.permutation(centers.size)
            epoch_loss = 0.0
            for lo in range(0, order.size, cfg.batch_size):
                # linear rate decay to 10% of the initial value, word2vec style
                lr = cfg.learning_rate * (1.0 - 0.9 * batch_no / max(total_batches - 1, 1))
                batch_no += 1
                sel = order[lo:lo + cfg.batch_size]
                c, pos, neg = centers[sel], contexts[sel], negatives[sel]
                u = U[c]
                vp = V[pos]
                vn = V[neg]
                score_p = np.einsum("bd,bd->b", u, vp)
                score_n = np.einsum("bd,bkd->bk", u, vn)
                epoch_loss -= float(_log_sigmoid(score_p).sum()
                                    + _log_sigmoid(-score_n).sum())
                gp = _sigmoid(score_p) - 1.0                   # sigma - label(1)
                gn = _sigmoid(score_n)                         # sigma - label(0)
                du = gp[:, None] * vp + np.einsum("bk,bkd->bd", gn, vn)
                acc_u = np.zeros_like(U)
                _scatter_add(acc_u, c, du)
                acc_v = np.zeros_like(V)
                _scatter_add(acc_v, pos, gp[:, None] * u)
                _scatter_add(acc_v, neg.ravel(),
                             (gn[:, :, None] * u[:, None, :]).reshape(-1, d))
                U -= lr * acc_u
                V -= lr * acc_v
            losses.append(epoch_loss / centers.size)

    isolated = [i for i in range(n) if graph.degree(i) == 0]
    if isolated:
        warnings.warn(f"{len(isolated)} isolated node(s) received random unit vectors",
                      stacklevel=2)
        iso_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed & 0xFFFFFFFF, 0x150]))
        for i in isolated:
            vec = iso_rng.normal(size=d)
            U[i] = vec / np.linalg.norm(vec)

    matrix = EmbeddingMatrix(list(graph.node_ids), U)
    matrix.pretrain_loss = losses
    return matrix


# ---------------------------------------------------------------------------
# degree-weighted whole-network summary
# ---------------------------------------------------------------------------

def network_embedding(matrix: EmbeddingMatrix, graph: Graph, zeta: float = 1e-3) -> np.ndarray:
    """Weighted sum of identity vectors, weight zeta / (zeta + degree).

    Low-degree identities contribute more; the result is a single dim-vector
    summarizing the whole graph.
    """
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    matrix.check_aligned(graph)
    alpha = zeta / (zeta + graph.degrees().astype(np.float64))
    return alpha @ matrix.rows


@dataclass
class NetworkEmbedding:
    """Per-graph summary vectors and their concatenation (the step-1 state)."""

    e_original: np.ndarray
    e_target: np.ndarray

    def __post_init__(self):
        self.e_original = np.asarray(self.e_original, dtype=np.float64)
        self.e_target = np.asarray(self.e_target, dtype=np.float64)
        if self.e_original.shape != self.e_target.shape:
            raise EmbeddingFormatError("network embedding halves must share a dimension")

    @property
    def s_net(self) -> np.ndarray:
        return np.concatenate([self.e_original, self.e_target])


def combined_network_embedding(m_original: EmbeddingMatrix, g_original: Graph,
                               m_target: EmbeddingMatrix, g_target: Graph,
                               zeta: float = 1e-3) -> NetworkEmbedding:
    return NetworkEmbedding(network_embedding(m_original, g_original, zeta),
                            network_embedding(m_target, g_target, zeta))


# ---------------------------------------------------------------------------
# text round trip
# ---------------------------------------------------------------------------

def save_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """Text format: header "N d", then one "label v1 ... vd" line per row.

    Floats are written with repr so load returns bitwise-equal values.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.node_count} {matrix.dim}\n")
        for label, row in zip(matrix.labels, matrix.rows):
            fh.write(label + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_embeddings(path) -> EmbeddingMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}: header must be 'N d'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}: header must be 'N d'") from exc
        labels, rows = [], []
        for line_no, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            tokens = raw.split()
            if len(tokens) != d + 1:
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: expected label plus {d} values, got {len(tokens) - 1}")
            labels.append(tokens[0])
            rows.append([float(t) for t in tokens[1:]])
    if len(labels) != n:
        raise EmbeddingFormatError(
            f"{path}: header claims {n} rows, file holds {len(labels)}")
    return EmbeddingMatrix(labels, np.array(rows, dtype=np.float64))
