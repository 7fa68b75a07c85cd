import logging

import numpy as np
import pytest

from smg.errors import DatasetError
from smg.tu import dataset_summary, load_tu_dataset, resolve_dataset_path


def test_mutag_statistics(mutag):
    # published dataset statistics: 188 graphs, 2 classes, 17.93 nodes on average
    stats = dataset_summary(mutag)
    assert stats["graphs"] == 188 and stats["classes"] == 2
    assert round(stats["avg_nodes"], 2) == 17.93
    assert stats["feature_dim"] == 7
    assert all(g.is_symmetric() for g in mutag)
    assert sorted({g.label for g in mutag}) == [0, 1]


def test_toy_dataset(toy_tu_dir):
    graphs = load_tu_dataset(toy_tu_dir)
    assert [g.num_nodes for g in graphs] == [3, 3]
    assert [g.num_edges for g in graphs] == [2, 3]
    assert [g.label for g in graphs] == [0, 1]
    # no node labels: one-hot degree features of width max degree + 1
    assert graphs[0].features.tolist() == [[0, 1, 0], [0, 0, 1], [0, 1, 0]]


def test_node_labels_become_one_hot(toy_tu_dir):
    (toy_tu_dir / "TOY_node_labels.txt").write_text("0\n2\n0\n2\n2\n5\n")
    graphs = load_tu_dataset(toy_tu_dir)
    assert graphs[0].features.tolist() == [[1, 0, 0], [0, 1, 0], [1, 0, 0]]
    assert graphs[1].features[2].tolist() == [0, 0, 1]


def test_missing_file_named(toy_tu_dir):
    (toy_tu_dir / "TOY_graph_indicator.txt").unlink()
    with pytest.raises(DatasetError, match="graph_indicator"):
        load_tu_dataset(toy_tu_dir)


def test_cross_graph_edge_reports_line(toy_tu_dir):
    a = toy_tu_dir / "TOY_A.txt"
    a.write_text(a.read_text() + "3, 4\n")
    with pytest.raises(DatasetError, match="TOY_A.txt:11"):
        load_tu_dataset(toy_tu_dir)


def test_crlf_line_endings(toy_tu_dir):
    for path in toy_tu_dir.iterdir():
        path.write_bytes(path.read_bytes().replace(b"\n", b"\r\n"))
    assert [g.num_edges for g in load_tu_dataset(toy_tu_dir)] == [2, 3]


def test_duplicate_lines_dropped_with_warning(toy_tu_dir, caplog):
    a = toy_tu_dir / "TOY_A.txt"
    a.write_text(a.read_text() + "1, 2\n")
    with caplog.at_level(logging.WARNING):
        graphs = load_tu_dataset(toy_tu_dir)
    assert graphs[0].num_edges == 2
    assert "duplicate" in caplog.text


def test_resolve_under_data_dir(toy_tu_dir, monkeypatch):
    monkeypatch.setenv("SMG_DATA_DIR", str(toy_tu_dir.parent))
    assert resolve_dataset_path("TOY") == toy_tu_dir
    with pytest.raises(DatasetError):
        resolve_dataset_path("NOPE")
