import numpy as np
import pydot
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smg.errors import ContractError
from smg.graph import erdos_renyi
from smg.layers import ModelConfig, SmgModel
from smg.viz import MaskSnapshot, dot_source, export_dot, export_snapshot, fill_color, gray_level


def parse(text):
    (g,) = pydot.graph_from_dot_data(text)
    nodes = {n.get_name(): n for n in g.get_nodes() if n.get_name() not in ("node", "graph", "edge")}
    edges = {tuple(sorted((int(e.get_source()), int(e.get_destination())))) for e in g.get_edges()}
    return nodes, edges


def test_endpoint_colors():
    assert fill_color(0.0) == "#FFFFFF"
    assert fill_color(1.0) == "#000000"
    assert [gray_level(m) for m in (0.25, 0.5, 0.75)] == [191, 128, 64]


@given(st.floats(0, 1), st.floats(0, 1))
def test_gray_level_monotone(a, b):
    if a <= b:
        assert gray_level(a) >= gray_level(b)
    assert 0 <= gray_level(a) <= 255


def test_dot_reparses_to_path(p3):
    snap = MaskSnapshot(0, np.array([[0.0, 0.5, 1.0]]))
    nodes, edges = parse(dot_source(p3, snap, 0))
    assert set(nodes) == {"0", "1", "2"}
    assert edges == {(0, 1), (1, 2)}
    assert nodes["0"].get("fillcolor") == '"#FFFFFF"'
    assert nodes["2"].get("fillcolor") == '"#000000"'


def test_export_is_byte_identical(tmp_path, p3):
    snap = MaskSnapshot(0, np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]))
    a = export_dot(p3, snap, 1, tmp_path / "a.dot").read_bytes()
    b = export_dot(p3, snap, 1, tmp_path / "b.dot").read_bytes()
    assert a == b and b"graph_0_layer_2" in a


def test_layout_hint_for_large_graphs():
    rng = np.random.default_rng(0)
    big = erdos_renyi(150, 0.02, rng)
    assert "layout=sfdp" in dot_source(big, MaskSnapshot(0, np.zeros((1, 150))), 0)


def test_snapshot_validation(p3):
    with pytest.raises(ContractError):
        MaskSnapshot(0, np.array([[1.5, 0, 0]]))
    with pytest.raises(ContractError):
        dot_source(p3, MaskSnapshot(0, np.zeros((1, 3))), 1)
    with pytest.raises(ContractError):
        dot_source(p3, MaskSnapshot(0, np.zeros((1, 4))), 0)
    assert MaskSnapshot.from_masks(0, np.ones((2, 3, 4))).values.shape == (2, 3)


def test_export_snapshot_from_model(tmp_path):
    g = erdos_renyi(8, 0.4, np.random.default_rng(1), feature_dim=3)
    model = SmgModel(ModelConfig(in_dim=3, hidden=4, layers=2, channel_mode="multi"), seed=0)
    paths = export_snapshot(model, g, tmp_path)
    assert [p.name for p in paths] == ["graph_0_layer_1.dot", "graph_0_layer_2.dot"]
    for p in paths:
        nodes, edges = parse(p.read_text())
        assert set(nodes) == {str(v) for v in range(8)}
        assert edges == set(g.edges())


def test_unwritable_path(tmp_path, p3):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export_dot(p3, MaskSnapshot(0, np.zeros((1, 3))), 0, blocker / "sub" / "out.dot")
