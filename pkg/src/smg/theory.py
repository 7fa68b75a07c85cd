"""Machine checks of the subgraph-equivalence results for soft-mask layers.

For a subgraph ``S`` of ``G`` there are fixed mask assignments under which a
K-layer soft-mask network run on all of ``G`` reproduces, for every node of
``S``, the states that the unmasked network computes on the induced
subgraph ``G_S``:

* nodes of ``S`` get mask 1 at every layer;
* nodes outside ``S`` with a neighbor in ``S`` ("boundary outsiders") get
  mask 0 at every odd layer ``k = 1, 3, 5, ...`` (1-based);
* every other entry is free.

Additionally zeroing every outsider at the final layer makes the SUM readout
of ``G`` equal the SUM readout of ``G_S``.  The checks below construct these
assignments, run both sides and report the largest discrepancy.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConstraintError, ContractError
from .graph import Graph, SubgraphSelection, erdos_renyi, induced_subgraph, make_batch
from .layers import (
    ACTIVATIONS,
    ModelConfig,
    SmgModel,
    input_states,
    model_forward,
    readout_mean,
    readout_sum,
    run_layers,
)

TOLERANCE = 1e-9
STACK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Fill:
    """How to fill mask entries the construction leaves unconstrained."""

    kind: str = "constant"
    value: float = 1.0
    seed: int = 0

    @classmethod
    def constant(cls, value: float = 1.0) -> "Fill":
        if not 0.0 <= value <= 1.0:
            raise ContractError("constant fill must lie in [0, 1]")
        return cls("constant", value)

    @classmethod
    def random(cls, seed: int) -> "Fill":
        return cls("random", 0.0, seed)

    def draw(self, shape) -> np.ndarray:
        if self.kind == "constant":
            return np.full(shape, self.value)
        return np.random.default_rng(self.seed).uniform(0.0, 1.0, size=shape)


@dataclass(frozen=True, eq=False)
class LemmaMaskSpec:
    graph: Graph
    selection: SubgraphSelection
    K: int
    free_fill: Fill = field(default_factory=Fill.constant)


@dataclass
class OracleStates:
    """Per-layer states of the all-ones network on the induced subgraph.

    ``states[k][i]`` belongs to parent node ``nodes[i]``.
    """

    nodes: np.ndarray
    states: list[np.ndarray]
    readout: np.ndarray


@dataclass
class EquivalenceReport:
    max_abs_diff: float
    per_node_diffs: dict[int, float]
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_abs_diff <= self.tolerance)


def _selection(graph: Graph, members) -> SubgraphSelection:
    if isinstance(members, SubgraphSelection):
        return members
    return SubgraphSelection(graph, frozenset(int(v) for v in members))


def boundary_outsiders(graph: Graph, members) -> np.ndarray:
    """Nodes outside ``members`` with at least one neighbor inside."""
    inside = np.zeros(graph.num_nodes, dtype=bool)
    inside[list(members)] = True
    return np.array(
        [v for v in range(graph.num_nodes) if not inside[v] and inside[graph.neighbors(v)].any()],
        dtype=np.int64,
    )


def lemma1_masks(spec: LemmaMaskSpec) -> np.ndarray:
    """``(K, n)`` mask matrix satisfying the node-level equivalence condition."""
    members = spec.selection.members
    if not members:
        raise ContractError("the selected subgraph must be nonempty")
    if spec.K < 1:
        raise ContractError("K must be at least 1")
    M = spec.free_fill.draw((spec.K, spec.graph.num_nodes))
    outsiders = boundary_outsiders(spec.graph, members)
    for k in range(spec.K):
        if (k + 1) % 2 == 1:
            M[k, outsiders] = 0.0
    M[:, sorted(members)] = 1.0
    return M


def theorem1_masks(spec: LemmaMaskSpec) -> np.ndarray:
    """``lemma1_masks`` with every outsider additionally zeroed at the last layer."""
    M = lemma1_masks(spec)
    inside = np.zeros(spec.graph.num_nodes, dtype=bool)
    inside[sorted(spec.selection.members)] = True
    M[spec.K - 1, ~inside] = 0.0
    return M


def validate_constraints(model: SmgModel, need_zero_invariant_readout: bool = False) -> None:
    """Raise ``ConstraintError`` unless the layers meet the structural constraints.

    Layers must carry no constant term, the activation must map 0 to 0 and
    neighbor aggregation must be zero invariant (SUM).
    """
    cfg = model.config
    if cfg.layer_bias or any(layer.bias is not None for layer in model.layers):
        raise ConstraintError("layer linear maps carry a bias; masked nodes would not be annihilated")
    at_zero = ACTIVATIONS[cfg.activation](T.Tensor(np.zeros(1))).data[0]
    if at_zero != 0.0:
        raise ConstraintError(f"activation {cfg.activation!r} maps 0 to {at_zero}, needs sigma(0) = 0")
    if cfg.aggregator != "sum":
        raise ConstraintError(f"aggregator {cfg.aggregator!r} is not zero invariant; use SUM")
    if need_zero_invariant_readout and cfg.readout != "sum":
        raise ConstraintError(f"readout {cfg.readout!r} is not the zero-invariant SUM of the last layer")


def _states(model: SmgModel, graph: Graph, masks: np.ndarray) -> list[np.ndarray]:
    with T.no_grad():
        out = model_forward(model, graph, masks)
    return [s.data for s in out.states]


def oracle_subgraph_states(graph: Graph, selection, model: SmgModel, K: int | None = None) -> OracleStates:
    """Run the all-ones network with the same parameters on the induced subgraph."""
    selection = _selection(graph, selection)
    if K is not None and K != model.num_layers:
        raise ContractError(f"model has {model.num_layers} layers, K={K} requested")
    sub = induced_subgraph(graph, selection.members)
    ones = np.ones((model.num_layers, sub.num_nodes))
    with T.no_grad():
        out = model_forward(model, sub, ones)
        last = out.states[-1]
        pooled = readout_sum(last, [0, sub.num_nodes]).data[0]
        if model.config.readout == "mean":
            pooled = readout_mean(last, [0, sub.num_nodes]).data[0]
    return OracleStates(selection.nodes, [s.data for s in out.states], pooled)


def compare_node_states(graph: Graph, selection, model: SmgModel, masks: np.ndarray, tolerance: float = TOLERANCE) -> EquivalenceReport:
    """Last-layer states of ``S`` under ``masks`` against the subgraph oracle."""
    selection = _selection(graph, selection)
    oracle = oracle_subgraph_states(graph, selection, model)
    full = _states(model, graph, masks)[-1]
    diffs = {
        int(v): float(np.max(np.abs(full[v] - oracle.states[-1][i]), initial=0.0))
        for i, v in enumerate(oracle.nodes)
    }
    return EquivalenceReport(max(diffs.values(), default=0.0), diffs, tolerance)


def check_lemma1(
    graph: Graph,
    selection,
    model: SmgModel,
    K: int | None = None,
    fills: Sequence[Fill] = (Fill.constant(1.0), Fill.random(0)),
    tolerance: float = TOLERANCE,
) -> EquivalenceReport:
    """Worst node-level discrepancy over all fill policies."""
    validate_constraints(model)
    selection = _selection(graph, selection)
    K = model.num_layers if K is None else K
    worst: EquivalenceReport | None = None
    for fill in fills:
        masks = lemma1_masks(LemmaMaskSpec(graph, selection, K, fill))
        report = compare_node_states(graph, selection, model, masks, tolerance)
        if worst is None or report.max_abs_diff > worst.max_abs_diff:
            worst = report
    return worst


def check_theorem1(
    graph: Graph,
    selection,
    model: SmgModel,
    K: int | None = None,
    fill: Fill = Fill.constant(1.0),
    tolerance: float = TOLERANCE,
    allow_non_zero_invariant: bool = False,
) -> EquivalenceReport:
    """Graph-level readout of the masked full graph against the subgraph oracle.

    Refuses non zero-invariant readouts unless ``allow_non_zero_invariant``
    is set, which exists to exhibit counterexamples under MEAN.
    """
    if allow_non_zero_invariant:
        if model.config.readout not in ("sum", "mean"):
            raise ConstraintError("graph-level check compares last-layer SUM or MEAN readouts only")
        validate_constraints(model)
    else:
        validate_constraints(model, need_zero_invariant_readout=True)
    selection = _selection(graph, selection)
    K = model.num_layers if K is None else K
    masks = theorem1_masks(LemmaMaskSpec(graph, selection, K, fill))
    oracle = oracle_subgraph_states(graph, selection, model)
    last = _states(model, graph, masks)[-1]
    with T.no_grad():
        pool = readout_mean if model.config.readout == "mean" else readout_sum
        pooled = pool(last, [0, graph.num_nodes]).data[0]
    diff = float(np.max(np.abs(pooled - oracle.readout), initial=0.0))
    return EquivalenceReport(diff, {-1: diff}, tolerance)


def zero_invariance_probe(readout_kind: str, trials: int = 200, seed: int = 0) -> dict:
    """Test ``f(S) == f(S without zero vectors)`` and ``f({}) == 0`` on random multisets.

    Returns a verdict with the first witness multiset that breaks the
    property, if any.
    """
    if readout_kind not in ("sum", "mean"):
        raise ContractError("readout_kind must be 'sum' or 'mean'")

    def f(rows: np.ndarray) -> np.ndarray:
        n = rows.shape[0]
        H = rows if n else np.zeros((0, 1))
        total = readout_sum(H, [0, n]).data[0]
        if readout_kind == "mean":
            return readout_mean(H, [0, n]).data[0]
        return total

    empty = f(np.zeros((0, 1)))
    if np.any(empty != 0):
        return {"kind": readout_kind, "zero_invariant": False, "witness": {"multiset": [], "value": empty.tolist()}}
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d = int(rng.integers(1, 4))
        base = rng.integers(-5, 6, size=(int(rng.integers(1, 5)), d)).astype(np.float64)
        base = base[np.any(base != 0, axis=1)]
        if base.shape[0] == 0:
            continue
        zeros = np.zeros((int(rng.integers(1, 4)), d))
        padded = np.concatenate([base, zeros])[rng.permutation(base.shape[0] + zeros.shape[0])]
        a, b = f(padded), f(base)
        if not np.array_equal(a, b):
            return {
                "kind": readout_kind,
                "zero_invariant": False,
                "witness": {
                    "with_zeros": padded.tolist(),
                    "without_zeros": base.tolist(),
                    "values": [a.tolist(), b.tolist()],
                },
            }
    return {"kind": readout_kind, "zero_invariant": True, "witness": None, "trials": trials}


def stacked_composition_check(
    model: SmgModel,
    graph: Graph,
    segment_sizes: Sequence[int],
    per_segment_masks: Sequence[np.ndarray],
    tolerance: float = STACK_TOLERANCE,
) -> EquivalenceReport:
    """Run the layers as consecutive separately-masked segments and as one stack.

    The segmented path feeds each segment's last states into the next; the
    monolithic path uses the vertically stacked masks.  Every layer's node
    states are compared.
    """
    if sum(segment_sizes) != model.num_layers or any(s < 1 for s in segment_sizes):
        raise ContractError(f"segment sizes {list(segment_sizes)} must be positive and sum to {model.num_layers}")
    if len(per_segment_masks) != len(segment_sizes):
        raise ContractError("one mask block per segment is required")
    for size, block in zip(segment_sizes, per_segment_masks):
        if np.asarray(block).shape[0] != size:
            raise ContractError("mask block rows must equal the segment's layer count")
    adjacency = graph.adjacency
    with T.no_grad():
        h0 = input_states(model, graph)
        segmented: list[np.ndarray] = []
        h = h0
        start = 0
        for size, block in zip(segment_sizes, per_segment_masks):
            states, _ = run_layers(h, adjacency, model.layers[start : start + size], model.config, np.asarray(block))
            segmented.extend(s.data for s in states)
            h = states[-1]
            start += size
        stacked = np.concatenate([np.asarray(b) for b in per_segment_masks], axis=0)
        mono, _ = run_layers(h0, adjacency, model.layers, model.config, stacked)
    per_node = np.zeros(graph.num_nodes)
    for a, b in zip(segmented, mono):
        per_node = np.maximum(per_node, np.max(np.abs(a - b.data), axis=1, initial=0.0))
    diffs = {int(v): float(per_node[v]) for v in range(graph.num_nodes)}
    return EquivalenceReport(float(per_node.max(initial=0.0)), diffs, tolerance)


# ---------------------------------------------------------------------------
# randomized suites


def random_model(
    rng: np.random.Generator,
    in_dim: int,
    hidden: int,
    layers: int,
    channel_mode: str = "scalar",
    readout: str = "sum",
    **overrides,
) -> SmgModel:
    """Model whose every parameter is drawn from N(0, 1/fan_in)."""
    config = ModelConfig(
        in_dim=in_dim,
        hidden=hidden,
        num_classes=2,
        layers=layers,
        channel_mode=channel_mode,
        readout=readout,
        allow_non_zero_invariant=readout == "mean" or overrides.get("aggregator") == "mean",
        **overrides,
    )
    model = SmgModel(config, rng)
    for p in model.parameters().values():
        fan_in = p.shape[0] if p.ndim == 2 else 1
        p.data = rng.standard_normal(p.shape) / np.sqrt(fan_in)
    return model


@dataclass
class Instance:
    index: int
    graph: Graph
    members: frozenset[int]
    model: SmgModel

    def describe(self) -> dict:
        return {
            "index": self.index,
            "num_nodes": self.graph.num_nodes,
            "edges": self.graph.edges(),
            "subgraph": sorted(self.members),
            "layers": self.model.num_layers,
            "channel_mode": self.model.config.channel_mode,
        }


def random_instance(
    seed: int,
    index: int,
    max_nodes: int = 12,
    edge_prob: float = 0.3,
    max_layers: int = 4,
    readout: str = "sum",
    min_nodes: int = 1,
) -> Instance:
    """Erdos-Renyi graph, random nonempty node subset and random model; replayable from (seed, index)."""
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(min_nodes, max_nodes + 1))
    in_dim = int(rng.integers(1, 5))
    graph = erdos_renyi(n, edge_prob, rng, feature_dim=in_dim)
    size = int(rng.integers(1, n + 1))
    members = frozenset(int(v) for v in rng.choice(n, size=size, replace=False))
    model = random_model(
        rng,
        in_dim,
        hidden=int(rng.integers(1, 7)),
        layers=int(rng.integers(1, max_layers + 1)),
        channel_mode=str(rng.choice(["scalar", "multi"])),
        readout=readout,
    )
    return Instance(index, graph, members, model)


@dataclass
class SuiteReport:
    suite: str
    seed: int
    instances: int
    worst_diff: float
    tolerance: float
    passed: bool
    witnesses: list[dict] = field(default_factory=list)
    runtime_s: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def lemma1_suite(trials: int = 200, seed: int = 42, tolerance: float = TOLERANCE) -> SuiteReport:
    start = time.perf_counter()
    worst, witnesses, nonzero = 0.0, [], 0
    for i in range(trials):
        inst = random_instance(seed, i)
        report = check_lemma1(inst.graph, inst.members, inst.model, fills=(Fill.constant(1.0), Fill.random(seed * 7919 + i)))
        worst = max(worst, report.max_abs_diff)
        if not report.passed:
            witnesses.append({**inst.describe(), "max_abs_diff": report.max_abs_diff})
        # guards against a suite that passes only because every state is zero
        nonzero += int(np.any(oracle_subgraph_states(inst.graph, inst.members, inst.model).states[-1] != 0))
    report = SuiteReport("lemma1", seed, trials, worst, tolerance, not witnesses, witnesses, time.perf_counter() - start)
    report.details["instances_with_nonzero_states"] = nonzero
    return report


def free_fill_suite(trials: int = 200, seed: int = 42, tolerance: float = TOLERANCE) -> SuiteReport:
    """Constant and random fills of the free entries give the same states on ``S``.

    Also counts instances where the two mask matrices differ, i.e. distinct
    assignments representing the same subgraph.
    """
    start = time.perf_counter()
    worst, witnesses, distinct = 0.0, [], 0
    for i in range(trials):
        inst = random_instance(seed, i)
        sel = _selection(inst.graph, inst.members)
        K = inst.model.num_layers
        a = lemma1_masks(LemmaMaskSpec(inst.graph, sel, K, Fill.constant(1.0)))
        b = lemma1_masks(LemmaMaskSpec(inst.graph, sel, K, Fill.random(seed * 104729 + i)))
        sa = _states(inst.model, inst.graph, a)[-1][sel.nodes]
        sb = _states(inst.model, inst.graph, b)[-1][sel.nodes]
        diff = float(np.max(np.abs(sa - sb), initial=0.0))
        distinct += int(not np.array_equal(a, b))
        worst = max(worst, diff)
        if diff > tolerance:
            witnesses.append({**inst.describe(), "max_abs_diff": diff})
    report = SuiteReport("free-fill", seed, trials, worst, tolerance, not witnesses, witnesses, time.perf_counter() - start)
    report.details["instances_with_distinct_masks"] = distinct
    return report


def theorem1_suite(trials: int = 200, seed: int = 42, tolerance: float = TOLERANCE) -> SuiteReport:
    start = time.perf_counter()
    worst, witnesses, distinct = 0.0, [], 0
    for i in range(trials):
        inst = random_instance(seed, i)
        sel = _selection(inst.graph, inst.members)
        fills = (Fill.constant(1.0), Fill.random(seed * 15485863 + i))
        for fill in fills:
            report = check_theorem1(inst.graph, sel, inst.model, fill=fill, tolerance=tolerance)
            worst = max(worst, report.max_abs_diff)
            if not report.passed:
                witnesses.append({**inst.describe(), "fill": fill.kind, "max_abs_diff": report.max_abs_diff})
        K = inst.model.num_layers
        distinct += int(not np.array_equal(*(theorem1_masks(LemmaMaskSpec(inst.graph, sel, K, f)) for f in fills)))
    report = SuiteReport("theorem1", seed, trials, worst, tolerance, not witnesses, witnesses, time.perf_counter() - start)
    report.details["instances_with_distinct_masks"] = distinct
    return report


def theorem1_mean_suite(trials: int = 200, seed: int = 42, tolerance: float = TOLERANCE) -> SuiteReport:
    """Same construction under MEAN readout; passes when counterexamples are found."""
    start = time.perf_counter()
    witnesses = []
    worst = 0.0
    for i in range(trials):
        inst = random_instance(seed, i, readout="mean", min_nodes=2)
        report = check_theorem1(inst.graph, inst.members, inst.model, tolerance=tolerance, allow_non_zero_invariant=True)
        worst = max(worst, report.max_abs_diff)
        if not report.passed:
            witnesses.append({**inst.describe(), "max_abs_diff": report.max_abs_diff})
    report = SuiteReport("theorem1-mean", seed, trials, worst, tolerance, bool(witnesses), witnesses[:5], time.perf_counter() - start)
    report.details["counterexamples"] = len(witnesses)
    return report


def annihilation_suite(trials: int = 1000, seed: int = 42) -> SuiteReport:
    """Nodes with override mask 0 at layer k have exactly zero state at layer k."""
    start = time.perf_counter()
    failures, checked = [], 0
    for i in range(trials):
        inst = random_instance(seed, i)
        rng = np.random.default_rng([seed, i, 1])
        K, n = inst.model.num_layers, inst.graph.num_nodes
        masks = rng.uniform(0.0, 1.0, size=(K, n))
        masks[rng.random((K, n)) < 0.4] = 0.0
        states = _states(inst.model, inst.graph, masks)
        for k in range(K):
            zeroed = np.flatnonzero(masks[k] == 0.0)
            checked += len(zeroed)
            if zeroed.size and np.any(states[k][zeroed] != 0.0):
                failures.append({**inst.describe(), "layer": k + 1})
    report = SuiteReport("annihilation", seed, trials, 0.0 if not failures else float("inf"), 0.0, not failures,
                         failures[:5], time.perf_counter() - start)
    report.details["masked_nodes_checked"] = checked
    return report


def stacked_suite(trials: int = 100, seed: int = 42, tolerance: float = STACK_TOLERANCE) -> SuiteReport:
    start = time.perf_counter()
    worst, witnesses = 0.0, []
    for i in range(trials):
        rng = np.random.default_rng([seed, i, 2])
        segments = int(rng.integers(2, 4))
        inst = random_instance(seed, i, max_layers=4)
        K = max(inst.model.num_layers, segments)
        if K != inst.model.num_layers:
            inst.model = random_model(rng, inst.graph.features.shape[1], inst.model.config.hidden, K,
                                      inst.model.config.channel_mode)
        cuts = np.sort(rng.choice(np.arange(1, K), size=segments - 1, replace=False))
        sizes = np.diff(np.concatenate([[0], cuts, [K]])).tolist()
        blocks = [rng.uniform(0.0, 1.0, size=(s, inst.graph.num_nodes)) for s in sizes]
        for b in blocks:
            b[rng.random(b.shape) < 0.3] = 0.0
        report = stacked_composition_check(inst.model, inst.graph, sizes, blocks, tolerance)
        worst = max(worst, report.max_abs_diff)
        if not report.passed:
            witnesses.append({**inst.describe(), "segments": sizes, "max_abs_diff": report.max_abs_diff})
    return SuiteReport("stacked", seed, trials, worst, tolerance, not witnesses, witnesses, time.perf_counter() - start)


def zero_invariance_suite(trials: int = 200, seed: int = 42) -> SuiteReport:
    start = time.perf_counter()
    sum_verdict = zero_invariance_probe("sum", trials, seed)
    mean_verdict = zero_invariance_probe("mean", trials, seed)
    passed = sum_verdict["zero_invariant"] and not mean_verdict["zero_invariant"]
    witnesses = [mean_verdict["witness"]] if mean_verdict["witness"] else []
    report = SuiteReport("zero-invariance", seed, trials, 0.0, 0.0, passed, witnesses, time.perf_counter() - start)
    report.details = {"sum": sum_verdict["zero_invariant"], "mean": mean_verdict["zero_invariant"]}
    return report


SUITES = {
    "lemma1": lemma1_suite,
    "theorem1": theorem1_suite,
    "theorem1-mean": theorem1_mean_suite,
    "free-fill": free_fill_suite,
    "annihilation": annihilation_suite,
    "stacked": stacked_suite,
    "zero-invariance": zero_invariance_suite,
}
