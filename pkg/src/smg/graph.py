"""Immutable graphs with CSR adjacency, induced subgraphs and batching."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph; every edge is stored in both directions.

    ``csr_targets[csr_offsets[v]:csr_offsets[v + 1]]`` lists the neighbors of
    ``v`` in ascending order.
    """

    num_nodes: int
    csr_offsets: np.ndarray
    csr_targets: np.ndarray
    features: np.ndarray | None = None
    label: int | float | None = None
    id: int = 0

    def __post_init__(self):
        if len(self.csr_offsets) != self.num_nodes + 1:
            raise ContractError("csr_offsets must have num_nodes + 1 entries")
        if self.features is not None and self.features.shape[0] != self.num_nodes:
            raise ContractError(
                f"features have {self.features.shape[0]} rows for {self.num_nodes} nodes"
            )

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: Iterable[tuple[int, int]],
        features=None,
        label=None,
        id: int = 0,
    ) -> "Graph":
        """Build from an undirected edge list; duplicates collapse to one edge."""
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ContractError(f"edge ({u}, {v}) outside 0..{num_nodes - 1}")
            pairs.add((u, v))
            pairs.add((v, u))
        if pairs:
            arr = np.array(sorted(pairs), dtype=np.int64)
            rows, cols = arr[:, 0], arr[:, 1]
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        offsets = np.cumsum(offsets)
        if features is not None:
            features = np.asarray(features, dtype=np.float64)
            if features.ndim == 1:
                features = features[:, None]
        return cls(num_nodes, offsets, cols, features, label, id)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.csr_targets), dtype=np.float64)
        mat = sp.csr_matrix((data, self.csr_targets, self.csr_offsets), shape=(self.num_nodes,) * 2)
        mat.has_sorted_indices = True
        return mat

    def neighbors(self, v: int) -> np.ndarray:
        return self.csr_targets[self.csr_offsets[v] : self.csr_offsets[v + 1]]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr_offsets)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (a self-loop counts once)."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        loops = int(np.count_nonzero(rows == self.csr_targets))
        return (len(self.csr_targets) - loops) // 2 + loops

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(u, v)`` with ``u <= v``, sorted."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        keep = rows <= self.csr_targets
        return [(int(u), int(v)) for u, v in zip(rows[keep], self.csr_targets[keep])]

    def with_features(self, features: np.ndarray) -> "Graph":
        return replace(self, features=np.asarray(features))

    def is_symmetric(self) -> bool:
        a = self.adjacency
        return (a != a.T).nnz == 0


@dataclass(frozen=True, eq=False)
class SubgraphSelection:
    parent: Graph
    members: frozenset[int]

    def __post_init__(self):
        bad = [v for v in self.members if not 0 <= v < self.parent.num_nodes]
        if bad:
            raise ContractError(f"selection contains nodes outside the parent graph: {sorted(bad)}")

    @property
    def nodes(self) -> np.ndarray:
        return np.array(sorted(self.members), dtype=np.int64)

    def induced(self) -> Graph:
        return induced_subgraph(self.parent, self.members)


def induced_subgraph(graph: Graph, members: Iterable[int]) -> Graph:
    """Subgraph on ``members`` keeping every parent edge with both ends inside.

    Local node i corresponds to the i-th smallest member, so ascending order
    is preserved.
    """
    nodes = np.array(sorted(set(int(v) for v in members)), dtype=np.int64)
    local = -np.ones(graph.num_nodes, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    edges = []
    for v in nodes:
        for u in graph.neighbors(v):
            if local[u] >= 0:
                edges.append((local[v], local[u]))
    feats = None if graph.features is None else graph.features[nodes]
    return Graph.from_edges(len(nodes), edges, feats, graph.label, graph.id)


@dataclass(frozen=True, eq=False)
class Batch:
    """Block-diagonal union of several graphs.

    Nodes of member graph i occupy rows ``boundaries[i]:boundaries[i + 1]``.
    """

    graph: Graph
    boundaries: np.ndarray
    labels: np.ndarray
    graph_ids: tuple[int, ...] = field(default=())

    @property
    def num_graphs(self) -> int:
        return len(self.boundaries) - 1

    @cached_property
    def pooling(self) -> sp.csr_matrix:
        """``(num_graphs, num_nodes)`` 0/1 matrix summing each graph's node range."""
        n = self.graph.num_nodes
        data = np.ones(n, dtype=np.float64)
        mat = sp.csr_matrix((data, np.arange(n), self.boundaries), shape=(self.num_graphs, n))
        mat.has_sorted_indices = True
        return mat


def make_batch(graphs: Sequence[Graph]) -> Batch:
    if not graphs:
        raise ContractError("make_batch needs at least one graph")
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    boundaries = np.concatenate([[0], np.cumsum(sizes)])
    offsets = [np.zeros(1, dtype=np.int64)]
    targets = []
    edge_base = 0
    for g, start in zip(graphs, boundaries[:-1]):
        offsets.append(g.csr_offsets[1:] + edge_base)
        targets.append(g.csr_targets + start)
        edge_base += len(g.csr_targets)
    features = None
    if all(g.features is not None for g in graphs):
        features = np.concatenate([g.features for g in graphs], axis=0)
    labels = np.array([np.nan if g.label is None else g.label for g in graphs])
    merged = Graph(
        int(boundaries[-1]),
        np.concatenate(offsets),
        np.concatenate(targets) if targets else np.zeros(0, dtype=np.int64),
        features,
        graphs[0].label if len(graphs) == 1 else None,
        graphs[0].id if len(graphs) == 1 else -1,
    )
    return Batch(merged, boundaries, labels, tuple(g.id for g in graphs))


def one_hot_degree_features(graphs: Sequence[Graph]) -> list[Graph]:
    """Replace features with a one-hot encoding of node degree.

    The width is the largest degree over the whole collection plus one, so
    every graph shares one input dimension.
    """
    max_degree = max((int(g.degrees.max(initial=0)) for g in graphs), default=0)
    out = []
    for g in graphs:
        feats = np.zeros((g.num_nodes, max_degree + 1))
        feats[np.arange(g.num_nodes), g.degrees] = 1.0
        out.append(g.with_features(feats))
    return out


def erdos_renyi(n: int, p: float, rng: np.random.Generator, feature_dim: int | None = None) -> Graph:
    """G(n, p) random graph; optional standard-normal node features."""
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = list(zip(*np.nonzero(upper)))
    feats = None if feature_dim is None else rng.standard_normal((n, feature_dim))
    return Graph.from_edges(n, edges, feats)


def stratified_kfold(labels: Sequence, k: int = 10, seed: int = 0) -> list["FoldSplit"]:
    """Stratified k-fold splits.

    Items of each class are shuffled with a seeded generator and dealt
    round-robin into folds; each class continues where the previous one
    stopped, which keeps fold sizes within one item of each other.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise ContractError("k must be at least 2")
    if k > n:
        raise ContractError(f"k={k} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        for item in members:
            folds[cursor % k].append(int(item))
            cursor += 1
    everything = np.arange(n)
    splits = []
    for i, test in enumerate(folds):
        test_ids = sorted(test)
        mask = np.ones(n, dtype=bool)
        mask[test_ids] = False
        splits.append(FoldSplit(i, [int(x) for x in everything[mask]], test_ids))
    return splits


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: list[int]
    test_ids: list[int]
