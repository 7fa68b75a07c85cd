import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smg.errors import ConstraintError, ContractError
from smg.graph import Graph, SubgraphSelection
from smg.layers import ModelConfig, SmgModel
from smg.theory import (
    SUITES,
    Fill,
    LemmaMaskSpec,
    boundary_outsiders,
    check_lemma1,
    check_theorem1,
    compare_node_states,
    lemma1_masks,
    oracle_subgraph_states,
    random_instance,
    random_model,
    stacked_composition_check,
    theorem1_masks,
    validate_constraints,
    zero_invariance_probe,
)

from conftest import unit_model


def spec(graph, members, K, fill=Fill.constant(1.0)):
    return LemmaMaskSpec(graph, SubgraphSelection(graph, frozenset(members)), K, fill)


def test_lemma_masks_on_path(p3):
    assert lemma1_masks(spec(p3, {0, 1}, 2)).tolist() == [[1, 1, 0], [1, 1, 1]]
    assert theorem1_masks(spec(p3, {0, 1}, 2)).tolist() == [[1, 1, 0], [1, 1, 0]]
    assert boundary_outsiders(p3, {0}).tolist() == [1]


def test_whole_graph_selection_gives_ones(triangle):
    assert np.all(lemma1_masks(spec(triangle, {0, 1, 2}, 3)) == 1)
    assert np.all(theorem1_masks(spec(triangle, {0, 1, 2}, 3)) == 1)


def test_empty_selection_rejected(p3):
    with pytest.raises(ContractError):
        lemma1_masks(spec(p3, set(), 2))


def test_random_fill_only_touches_free_entries(p3):
    M = lemma1_masks(spec(p3, {0}, 3, Fill.random(1)))
    assert np.all(M[:, 0] == 1) and M[0, 1] == 0 and M[2, 1] == 0
    assert 0 < M[1, 1] < 1 and np.all((M >= 0) & (M <= 1))


def test_oracle_by_hand_on_path(p3):
    # induced subgraph is the edge 0-1 with features 1, 2; unit weights sum a node and its neighbor
    oracle = oracle_subgraph_states(p3, {0, 1}, unit_model(2))
    assert [s.ravel().tolist() for s in oracle.states] == [[3.0, 3.0], [6.0, 6.0]]
    assert oracle.readout.tolist() == [12.0]
    report = check_lemma1(p3, {0, 1}, unit_model(2))
    assert report.passed and report.max_abs_diff == 0.0
    assert check_theorem1(p3, {0, 1}, unit_model(2)).max_abs_diff == 0.0


def test_oracle_single_node_is_relu_of_own_term():
    rng = np.random.default_rng(0)
    g = Graph.from_edges(2, [(0, 1)], features=rng.standard_normal((2, 3)))
    model = random_model(rng, 3, 4, 1)
    h0 = g.features[0] @ model.input_weight.data + model.input_bias.data
    expected = np.maximum(h0 @ model.layers[0].W1.data, 0)
    got = oracle_subgraph_states(g, {0}, model).states[0][0]
    assert np.max(np.abs(got - expected)) <= 1e-15


def test_negative_control_outsider_left_open(p3):
    # outsider 2 keeps mask 1 at layer 1, so it leaks into node 1
    report = compare_node_states(p3, {0, 1}, unit_model(1), np.ones((1, 3)))
    assert not report.passed
    assert report.per_node_diffs == {0: 0.0, 1: 3.0}


def test_validator_rejects_constant_terms_and_bad_activations():
    base = dict(in_dim=2, hidden=3, layers=2)
    with pytest.raises(ConstraintError):
        validate_constraints(SmgModel(ModelConfig(**base, layer_bias=True)))
    with pytest.raises(ConstraintError):
        validate_constraints(SmgModel(ModelConfig(**base, activation="sigmoid")))
    with pytest.raises(ConstraintError):
        validate_constraints(SmgModel(ModelConfig(**base, aggregator="mean", allow_non_zero_invariant=True)))
    with pytest.raises(ConstraintError):
        validate_constraints(SmgModel(ModelConfig(**base, readout="jk")), need_zero_invariant_readout=True)
    validate_constraints(SmgModel(ModelConfig(**base, activation="tanh")))


def test_bias_variant_breaks_equivalence(p3):
    model = unit_model(2, layer_bias=True)
    model.layers[0].bias.data[:] = 0.5
    with pytest.raises(ConstraintError):
        check_lemma1(p3, {0, 1}, model)
    masks = lemma1_masks(spec(p3, {0, 1}, 2))
    assert not compare_node_states(p3, {0, 1}, model, masks).passed


def test_theorem_refuses_mean_unless_allowed(p3):
    model = unit_model(2, readout="mean", allow_non_zero_invariant=True)
    with pytest.raises(ConstraintError):
        check_theorem1(p3, {0, 1}, model)
    # subgraph mean 12/2 = 6 against 12/3 = 4 on the masked full graph
    report = check_theorem1(p3, {0, 1}, model, allow_non_zero_invariant=True)
    assert report.max_abs_diff == pytest.approx(2.0, abs=1e-12)


def test_zero_invariance_probe():
    assert zero_invariance_probe("sum")["zero_invariant"]
    verdict = zero_invariance_probe("mean")
    assert not verdict["zero_invariant"]
    w = verdict["witness"]
    assert w["values"][0] != w["values"][1]
    assert np.all(np.sum(w["with_zeros"], axis=0) == np.sum(w["without_zeros"], axis=0))


def test_stacked_composition_simple(p3):
    model = unit_model(3)
    masks = np.array([[1, 0.5, 0], [0, 1, 1], [0.2, 0.3, 1.0]])
    assert stacked_composition_check(model, p3, [1, 2], [masks[:1], masks[1:]]).max_abs_diff == 0.0
    with pytest.raises(ContractError):
        stacked_composition_check(model, p3, [2, 2], [masks[:2], masks[2:]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 10_000))
def test_lemma_equivalence_property(seed, index):
    inst = random_instance(seed, index)
    assert check_lemma1(inst.graph, inst.members, inst.model).max_abs_diff <= 1e-9
    assert check_theorem1(inst.graph, inst.members, inst.model).max_abs_diff <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_zero_mask_annihilation_property(seed):
    inst = random_instance(seed, 0)
    rng = np.random.default_rng(seed)
    K, n = inst.model.num_layers, inst.graph.num_nodes
    masks = rng.uniform(size=(K, n)) * (rng.random((K, n)) > 0.5)
    out = inst.model(inst.graph, masks)
    for k in range(K):
        assert np.all(out.states[k].data[masks[k] == 0] == 0.0)


@pytest.mark.parametrize("name", sorted(SUITES))
def test_suites_pass_small(name):
    report = SUITES[name](trials=20, seed=3)
    assert report.passed, report.witnesses
    assert report.to_dict()["suite"] == name
