"""Reader for the TU graph-kernel benchmark text format.

A dataset ``NAME`` lives in one directory holding

* ``NAME_A.txt``: one directed pair ``i, j`` per line, 1-indexed global node ids
* ``NAME_graph_indicator.txt``: line t is the graph id of node t
* ``NAME_graph_labels.txt``: line g is the label of graph g
* ``NAME_node_labels.txt`` (optional): line t is an integer label of node t
* ``NAME_node_attributes.txt`` (optional): comma-separated floats of node t
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .graph import Graph, one_hot_degree_features

log = logging.getLogger(__name__)


def _lines(path: Path) -> list[str]:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise DatasetError(f"missing dataset file: {path}") from None
    # splitlines handles both LF and CRLF
    return [line.strip() for line in text.splitlines() if line.strip()]


def _fields(line: str, path: Path, lineno: int) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    if any(p == "" for p in parts):
        raise DatasetError(f"{path.name}:{lineno}: malformed line {line!r}")
    return parts


def _ints(path: Path) -> np.ndarray:
    values = []
    for lineno, line in enumerate(_lines(path), start=1):
        try:
            values.append(int(float(line)))
        except ValueError:
            raise DatasetError(f"{path.name}:{lineno}: expected an integer, got {line!r}") from None
    return np.array(values, dtype=np.int64)


def load_tu_dataset(directory, name: str | None = None, degree_features: bool = True) -> list[Graph]:
    """Load every graph of a TU dataset.

    Node labels are one-hot encoded (and appended to node attributes when
    both exist).  When neither is present and ``degree_features`` is set,
    one-hot degree features are synthesised.  Graph labels are remapped to
    ``0..C-1`` in sorted order of the original values.
    """
    directory = Path(directory)
    name = name or directory.name
    prefix = directory / name

    indicator = _ints(Path(f"{prefix}_graph_indicator.txt"))
    graph_labels_raw = _ints(Path(f"{prefix}_graph_labels.txt"))
    num_graphs = len(graph_labels_raw)
    num_nodes_total = len(indicator)
    if indicator.size and (indicator.min() < 1 or indicator.max() > num_graphs):
        raise DatasetError(f"{name}_graph_indicator.txt references graphs outside 1..{num_graphs}")

    graph_of = indicator - 1
    counts = np.bincount(graph_of, minlength=num_graphs)
    starts = np.concatenate([[0], np.cumsum(counts)])
    if np.any(np.diff(graph_of) < 0):
        raise DatasetError(f"{name}_graph_indicator.txt: node ids are not grouped by graph")

    a_path = Path(f"{prefix}_A.txt")
    edges: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    directed: set[tuple[int, int]] = set()
    undirected: set[tuple[int, int]] = set()
    duplicates = 0
    for lineno, line in enumerate(_lines(a_path), start=1):
        parts = _fields(line, a_path, lineno)
        if len(parts) != 2:
            raise DatasetError(f"{a_path.name}:{lineno}: expected 'i, j', got {line!r}")
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
        except ValueError:
            raise DatasetError(f"{a_path.name}:{lineno}: non-integer node id in {line!r}") from None
        if not (0 <= i < num_nodes_total and 0 <= j < num_nodes_total):
            raise DatasetError(f"{a_path.name}:{lineno}: node id outside 1..{num_nodes_total}")
        g = graph_of[i]
        if graph_of[j] != g:
            raise DatasetError(
                f"{a_path.name}:{lineno}: edge ({i + 1}, {j + 1}) joins graphs {g + 1} and {graph_of[j] + 1}"
            )
        if (i, j) in directed:
            duplicates += 1
            continue
        directed.add((i, j))
        key = (min(i, j), max(i, j))
        if key in undirected:
            continue
        undirected.add(key)
        edges[g].append((i - starts[g], j - starts[g]))
    if duplicates:
        log.warning("%s: dropped %d duplicate edge lines", name, duplicates)

    blocks = []
    label_path = Path(f"{prefix}_node_labels.txt")
    if label_path.exists():
        node_labels = _ints(label_path)
        if len(node_labels) != num_nodes_total:
            raise DatasetError(f"{label_path.name}: {len(node_labels)} lines for {num_nodes_total} nodes")
        values, index = np.unique(node_labels, return_inverse=True)
        onehot = np.zeros((num_nodes_total, len(values)))
        onehot[np.arange(num_nodes_total), index] = 1.0
        blocks.append(onehot)
    attr_path = Path(f"{prefix}_node_attributes.txt")
    if attr_path.exists():
        rows = []
        for lineno, line in enumerate(_lines(attr_path), start=1):
            try:
                rows.append([float(x) for x in _fields(line, attr_path, lineno)])
            except ValueError:
                raise DatasetError(f"{attr_path.name}:{lineno}: non-numeric attribute") from None
        attrs = np.array(rows, dtype=np.float64)
        if attrs.shape[0] != num_nodes_total:
            raise DatasetError(f"{attr_path.name}: {attrs.shape[0]} lines for {num_nodes_total} nodes")
        blocks.insert(0, attrs)
    features = np.concatenate(blocks, axis=1) if blocks else None

    classes = np.unique(graph_labels_raw)
    labels = np.searchsorted(classes, graph_labels_raw)

    graphs = []
    for g in range(num_graphs):
        lo, hi = starts[g], starts[g + 1]
        feats = None if features is None else features[lo:hi]
        graphs.append(Graph.from_edges(int(hi - lo), edges[g], feats, int(labels[g]), g))
    if features is None and degree_features:
        graphs = one_hot_degree_features(graphs)
    return graphs


def resolve_dataset_path(path_or_name: str) -> Path:
    """Use the path as given if it exists, else look under ``$SMG_DATA_DIR``."""
    path = Path(path_or_name)
    if path.exists():
        return path
    root = os.environ.get("SMG_DATA_DIR")
    if root and (Path(root) / path_or_name).exists():
        return Path(root) / path_or_name
    raise DatasetError(f"dataset directory not found: {path_or_name}")


def dataset_summary(graphs: list[Graph]) -> dict:
    labels = [g.label for g in graphs]
    return {
        "graphs": len(graphs),
        "classes": len(set(labels)),
        "avg_nodes": float(np.mean([g.num_nodes for g in graphs])) if graphs else 0.0,
        "avg_edges": float(np.mean([g.num_edges for g in graphs])) if graphs else 0.0,
        "feature_dim": int(graphs[0].features.shape[1]) if graphs and graphs[0].features is not None else 0,
    }
