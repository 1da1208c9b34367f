"""Identity networks, ground-truth anchor pairs, and synthetic benchmark pairs.

A Graph is an undirected, unweighted identity network over opaque string
labels. Labels map to dense integer indices at construction; all numeric
code downstream works on indices. An AnchorSet holds the known one-to-one
correspondences between an original and a target graph.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge-list / anchor files or invariant violations."""


@dataclass
class Graph:
    """Undirected graph with symmetric adjacency and no self-loops."""

    node_ids: list[str]
    neighbors: list[set[int]]
    index_of: dict[str, int] = field(repr=False)

    @classmethod
    def from_edges(cls, node_ids: Sequence[str], edges: Iterable[tuple[str, str]]) -> "Graph":
        index_of = {}
        for label in node_ids:
            if label in index_of:
                raise GraphFormatError(f"duplicate node label {label!r}")
            index_of[label] = len(index_of)
        neighbors: list[set[int]] = [set() for _ in node_ids]
        for a, b in edges:
            if a == b:
                raise GraphFormatError(f"self-loop on node {a!r} rejected")
            ia, ib = index_of[a], index_of[b]
            neighbors[ia].add(ib)
            neighbors[ib].add(ia)
        return cls(list(node_ids), neighbors, index_of)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return sum(len(n) for n in self.neighbors) // 2

    def degree(self, index: int) -> int:
        return len(self.neighbors[index])

    def degrees(self) -> np.ndarray:
        return np.array([len(n) for n in self.neighbors], dtype=np.int64)

    def edges(self) -> list[tuple[int, int]]:
        """All edges as (i, j) index pairs with i < j, sorted."""
        out = []
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if i < j:
                    out.append((i, j))
        out.sort()
        return out

    def validate(self) -> None:
        for i, nbrs in enumerate(self.neighbors):
            if i in nbrs:
                raise GraphFormatError(f"self-loop on {self.node_ids[i]!r}")
            for j in nbrs:
                if i not in self.neighbors[j]:
                    raise GraphFormatError(
                        f"asymmetric adjacency between {self.node_ids[i]!r} and {self.node_ids[j]!r}"
                    )


@dataclass
class AnchorSet:
    """One-to-one ground-truth pairs (original label, target label)."""

    pairs: list[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.pairs)

    def originals(self) -> list[str]:
        return [o for o, _ in self.pairs]

    def targets(self) -> list[str]:
        return [t for _, t in self.pairs]

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)

    def validate(self, g_original: Graph, g_target: Graph) -> None:
        seen_o: set[str] = set()
        seen_t: set[str] = set()
        for o, t in self.pairs:
            if o not in g_original.index_of:
                raise GraphFormatError(f"anchor references unknown original node {o!r}")
            if t not in g_target.index_of:
                raise GraphFormatError(f"anchor references unknown target node {t!r}")
            if o in seen_o:
                raise GraphFormatError(f"one-to-one violation: original node {o!r} appears twice")
            if t in seen_t:
                raise GraphFormatError(f"one-to-one violation: target node {t!r} appears twice")
            seen_o.add(o)
            seen_t.add(t)


@dataclass
class SyntheticSpec:
    """Parameters for a desk-scale benchmark pair with known ground truth."""

    node_count: int = 100
    base_edge_prob: float = 0.08
    edge_overlap: float = 0.95
    anchor_fraction: float = 1.0
    seed: int = 0
    model: str = "er"  # "er" (Erdos-Renyi) or "pa" (preferential attachment)
    pa_edges_per_node: int = 4

    def validate(self) -> None:
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if not 0.0 <= self.edge_overlap <= 1.0:
            raise ValueError("edge_overlap must lie in [0, 1]")
        if not 0.0 <= self.anchor_fraction <= 1.0:
            raise ValueError("anchor_fraction must lie in [0, 1]")
        if self.model not in ("er", "pa"):
            raise ValueError(f"unknown graph model {self.model!r}")


def _parse_two_column(path) -> list[tuple[int, str, str]]:
    """Shared reader for edge lists and anchor files: (line_no, tok_a, tok_b)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise GraphFormatError(
                    f"{path}:{line_no}: expected two whitespace-separated tokens, got {len(tokens)}"
                )
            rows.append((line_no, tokens[0], tokens[1]))
    return rows


def load_edge_list(path) -> Graph:
    """Load an undirected graph from a two-column text file.

    Lines starting with '#' are comments. Duplicate edges (in either
    direction) collapse to one; self-loops are rejected with the line number.
    Node index order is order of first appearance.
    """
    node_ids: list[str] = []
    index_of: dict[str, int] = {}

    def intern(label: str) -> int:
        if label not in index_of:
            index_of[label] = len(node_ids)
            node_ids.append(label)
        return index_of[label]

    edges: set[tuple[int, int]] = set()
    for line_no, a, b in _parse_two_column(path):
        if a == b:
            raise GraphFormatError(f"{path}:{line_no}: self-loop on node {a!r} rejected")
        ia, ib = intern(a), intern(b)
        edges.add((min(ia, ib), max(ia, ib)))
    neighbors: list[set[int]] = [set() for _ in node_ids]
    for i, j in edges:
        neighbors[i].add(j)
        neighbors[j].add(i)
    return Graph(node_ids, neighbors, index_of)


def load_anchors(path, g_original: Graph, g_target: Graph) -> AnchorSet:
    """Load ground-truth pairs (original label, target label) and validate."""
    pairs = [(a, b) for _, a, b in _parse_two_column(path)]
    anchors = AnchorSet(pairs)
    anchors.validate(g_original, g_target)
    return anchors


def split_anchors(anchors: AnchorSet, ratio: float) -> tuple[AnchorSet, AnchorSet]:
    """Deterministic train/test split: sort by original label, take the first
    floor(ratio * n) pairs for training and the remainder for testing."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"train ratio must lie strictly inside (0, 1), got {ratio}")
    ordered = sorted(anchors.pairs, key=lambda p: p[0])
    cut = int(len(ordered) * ratio)
    return AnchorSet(ordered[:cut]), AnchorSet(ordered[cut:])


def _er_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def _pa_edges(n: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Preferential attachment: each new node attaches to m existing nodes
    sampled proportional to degree (+1 smoothing so isolated starts attach)."""
    edges: set[tuple[int, int]] = set()
    degree = np.zeros(n, dtype=np.float64)
    for v in range(1, n):
        k = min(m, v)
        weights = degree[:v] + 1.0
        targets = rng.choice(v, size=k, replace=False, p=weights / weights.sum())
        for u in targets.tolist():
            edges.add((u, v))
            degree[u] += 1
            degree[v] += 1
    return sorted(edges)


def generate_synthetic(spec: SyntheticSpec) -> tuple[Graph, Graph, AnchorSet]:
    """Generate an (original, target) graph pair plus ground-truth anchors.

    Both copies derive from one base graph over the same latent node set;
    each base edge survives in each copy independently with probability
    edge_overlap + (1 - edge_overlap) / 2, so at edge_overlap = 1 the copies
    are identical and at lower values they diverge. Target labels are a
    seeded permutation of the latent nodes, so label identity carries no
    alignment information.
    """
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFF, 0x5E7]))
    n = spec.node_count
    if spec.model == "er":
        if spec.base_edge_prob * (n - 1) < 1.0:
            warnings.warn(
                f"expected degree {spec.base_edge_prob * (n - 1):.2f} < 1; "
                "graphs will be mostly disconnected",
                stacklevel=2,
            )
        base = _er_edges(n, spec.base_edge_prob, rng)
    else:
        base = _pa_edges(n, spec.pa_edges_per_node, rng)

    keep_prob = spec.edge_overlap + (1.0 - spec.edge_overlap) / 2.0
    width = len(str(n - 1))
    labels_o = [f"u{i:0{width}d}" for i in range(n)]
    perm = rng.permutation(n)
    # latent node i carries target label "v<perm[i]>"
    labels_t_latent = [f"v{int(perm[i]):0{width}d}" for i in range(n)]
    # target graph's own node order is ascending label order
    order_t = np.argsort(perm)
    node_ids_t = [labels_t_latent[int(i)] for i in order_t]

    # rng.random() lies in [0, 1), so keep_prob == 1.0 keeps every edge
    edges_o: list[tuple[str, str]] = []
    edges_t: list[tuple[str, str]] = []
    for i, j in base:
        if rng.random() < keep_prob:
            edges_o.append((labels_o[i], labels_o[j]))
        if rng.random() < keep_prob:
            edges_t.append((labels_t_latent[i], labels_t_latent[j]))

    g_original = Graph.from_edges(labels_o, edges_o)
    g_target = Graph.from_edges(node_ids_t, edges_t)

    anchor_count = int(round(n * spec.anchor_fraction))
    anchored = rng.choice(n, size=anchor_count, replace=False)
    pairs = sorted((labels_o[int(i)], labels_t_latent[int(i)]) for i in anchored)
    anchors = AnchorSet(pairs)
    anchors.validate(g_original, g_target)
    return g_original, g_target, anchors


def write_edge_list(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# edge list: one undirected edge per line\n")
        for i, j in graph.edges():
            fh.write(f"{graph.node_ids[i]} {graph.node_ids[j]}\n")


def write_anchors(anchors: AnchorSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# anchors: original label, target label\n")
        for o, t in anchors.pairs:
            fh.write(f"{o} {t}\n")
