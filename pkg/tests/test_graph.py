import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smg.errors import ContractError
from smg.graph import (
    Graph,
    SubgraphSelection,
    erdos_renyi,
    induced_subgraph,
    make_batch,
    one_hot_degree_features,
    stratified_kfold,
)


@st.composite
def graph_and_subsets(draw):
    n = draw(st.integers(1, 10))
    seed = draw(st.integers(0, 2**32 - 1))
    g = erdos_renyi(n, 0.4, np.random.default_rng(seed))
    s = draw(st.sets(st.integers(0, n - 1)))
    t = draw(st.sets(st.integers(0, n - 1)))
    return g, s, t


def test_from_edges_symmetrises_and_dedups():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (0, 1), (1, 2)])
    assert g.is_symmetric()
    assert g.edges() == [(0, 1), (1, 2)]
    assert g.num_edges == 2
    assert g.degrees.tolist() == [1, 2, 1]


def test_neighbors_sorted(triangle):
    assert triangle.neighbors(1).tolist() == [0, 2]


def test_induced_subgraph_of_path(p3):
    sub = induced_subgraph(p3, {0, 1})
    assert sub.num_nodes == 2 and sub.edges() == [(0, 1)]
    assert sub.features.ravel().tolist() == [1.0, 2.0]
    assert induced_subgraph(p3, {0, 2}).num_edges == 0


def test_selection_rejects_outside_nodes(p3):
    with pytest.raises(ContractError):
        SubgraphSelection(p3, frozenset({5}))


@settings(max_examples=60, deadline=None)
@given(graph_and_subsets())
def test_induced_subgraph_properties(case):
    g, s, t = case
    full = induced_subgraph(g, range(g.num_nodes))
    assert full.edges() == g.edges()
    once = induced_subgraph(g, s)
    assert induced_subgraph(once, range(once.num_nodes)).edges() == once.edges()
    # composition: inducing on T then on the part of S inside T equals inducing on S ∩ T
    inner = sorted(s & t)
    t_sorted = sorted(t)
    local = [t_sorted.index(v) for v in inner]
    assert induced_subgraph(induced_subgraph(g, t), local).edges() == induced_subgraph(g, inner).edges()
    # every kept edge exists in the parent between the mapped members
    nodes = sorted(s)
    for u, v in once.edges():
        assert nodes[v] in g.neighbors(nodes[u])


def test_batch_offsets(p3, triangle):
    b = make_batch([p3, triangle])
    assert b.boundaries.tolist() == [0, 3, 6]
    assert b.graph.num_nodes == 6 and b.graph.num_edges == 5
    assert b.graph.edges() == [(0, 1), (1, 2), (3, 4), (3, 5), (4, 5)]
    assert b.labels.tolist() == [0, 1]
    assert b.pooling.toarray().tolist() == [[1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]]


def test_single_graph_batch_is_identity(p3):
    b = make_batch([p3])
    assert b.graph.edges() == p3.edges()
    assert np.array_equal(b.graph.features, p3.features)
    with pytest.raises(ContractError):
        make_batch([])


def test_degree_features():
    g = Graph.from_edges(4, [(0, 1), (1, 2)])
    (f,) = one_hot_degree_features([g])
    assert f.features[1].tolist() == [0, 0, 1]
    assert f.features[3].tolist() == [1, 0, 0]
    assert np.all(f.features.sum(axis=1) == 1)


def test_kfold_balanced_classes():
    labels = [0] * 10 + [1] * 10
    folds = stratified_kfold(labels, k=10, seed=0)
    for f in folds:
        assert sorted(labels[i] for i in f.test_ids) == [0, 1]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=10, max_size=60), st.integers(2, 10), st.integers(0, 1000))
def test_kfold_partition_properties(labels, k, seed):
    folds = stratified_kfold(labels, k=k, seed=seed)
    tests = [i for f in folds for i in f.test_ids]
    assert sorted(tests) == list(range(len(labels)))
    sizes = [len(f.test_ids) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    for f in folds:
        assert set(f.train_ids).isdisjoint(f.test_ids)
        assert len(f.train_ids) + len(f.test_ids) == len(labels)
    again = stratified_kfold(labels, k=k, seed=seed)
    assert [f.test_ids for f in again] == [f.test_ids for f in folds]


def test_kfold_on_mutag_partitions(mutag):
    folds = stratified_kfold([g.label for g in mutag], k=10, seed=0)
    assert sorted(i for f in folds for i in f.test_ids) == list(range(188))


def test_kfold_errors():
    with pytest.raises(ContractError):
        stratified_kfold([0, 1], k=1)
    with pytest.raises(ContractError):
        stratified_kfold([0, 1], k=3)
