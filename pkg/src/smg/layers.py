"""Soft-mask GNN layers, the mask network, readouts and the full model.

One layer maps node states ``h`` (n x d) and masks ``m`` to

    h'_v = act(m_v * (h_v @ W1 + (sum_{u in N(v)} m_u * h_u) @ W2))

with no constant term, so ``m_v = 0`` forces ``h'_v = 0``.  In scalar mode
``m`` has one value per node (n x 1); in multi-channel mode one per node
and channel (n x d) and the products are elementwise.

The mask network computes layer-k masks from the previous layer's masked
states:

    x_v   = m_v^(k-1) * h_v^(k-1)
    m_v^k = sigmoid(MLP(relu([x_v @ L1 + b1 || sum_{u in N(v)} (x_u @ L2 + b2)])))

with ``m^(0) = 1``.  Its biases are required; without them an all-zero
input pins every mask at exactly 0.5.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError
from .graph import Batch, Graph, make_batch
from .tensor import Tensor

CHECKPOINT_FORMAT = "smg-checkpoint"
CHECKPOINT_VERSION = 1

ACTIVATIONS = {"relu": T.relu, "sigmoid": T.sigmoid, "tanh": T.tanh}
READOUTS = ("sum", "jk", "mean")
ZERO_INVARIANT_READOUTS = ("sum", "jk")


@dataclass
class ModelConfig:
    in_dim: int
    hidden: int = 32
    num_classes: int = 2
    layers: int = 3
    channel_mode: str = "scalar"
    readout: str = "sum"
    dropout: float = 0.0
    dtype: str = "float64"
    # variants below exist for the constraint checks and negative controls
    activation: str = "relu"
    aggregator: str = "sum"
    layer_bias: bool = False
    allow_non_zero_invariant: bool = False

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("a model needs at least one layer")
        if self.in_dim < 1 or self.hidden < 1 or self.num_classes < 1:
            raise ConfigError("dimensions must be positive")
        if self.channel_mode not in ("scalar", "multi"):
            raise ConfigError(f"channel_mode must be 'scalar' or 'multi', got {self.channel_mode!r}")
        if self.readout not in READOUTS:
            raise ConfigError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {tuple(ACTIVATIONS)}")
        if self.aggregator not in ("sum", "mean"):
            raise ConfigError("aggregator must be 'sum' or 'mean'")
        if not self.allow_non_zero_invariant and (self.readout == "mean" or self.aggregator == "mean"):
            raise ConfigError("MEAN is not zero invariant and is rejected for soft-mask models")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")

    @property
    def mask_width(self) -> int:
        return 1 if self.channel_mode == "scalar" else self.hidden

    @property
    def readout_dim(self) -> int:
        return self.hidden * (self.layers if self.readout == "jk" else 1)


@dataclass
class MaskNetParams:
    L1_weight: Tensor
    L1_bias: Tensor
    L2_weight: Tensor
    L2_bias: Tensor
    hidden_weight: Tensor
    hidden_bias: Tensor
    out_weight: Tensor
    out_bias: Tensor

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.L1.weight": self.L1_weight,
            f"{prefix}.L1.bias": self.L1_bias,
            f"{prefix}.L2.weight": self.L2_weight,
            f"{prefix}.L2.bias": self.L2_bias,
            f"{prefix}.mlp.hidden.weight": self.hidden_weight,
            f"{prefix}.mlp.hidden.bias": self.hidden_bias,
            f"{prefix}.mlp.out.weight": self.out_weight,
            f"{prefix}.mlp.out.bias": self.out_bias,
        }


@dataclass
class SmgLayerParams:
    W1: Tensor
    W2: Tensor
    mask_net: MaskNetParams
    bias: Tensor | None = None

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.W1": self.W1, f"{prefix}.W2": self.W2}
        if self.bias is not None:
            out[f"{prefix}.bias"] = self.bias
        out.update(self.mask_net.named(f"{prefix}.mask"))
        return out


@dataclass
class MaskMatrix:
    """Per-layer masks: ``(K, n)`` in scalar mode, ``(K, n, d)`` in multi-channel mode."""

    values: np.ndarray
    provenance: str = "learned"

    @property
    def num_layers(self) -> int:
        return self.values.shape[0]

    def layer(self, k: int) -> np.ndarray:
        return self.values[k]

    def channel_mean(self) -> np.ndarray:
        return self.values if self.values.ndim == 2 else self.values.mean(axis=2)


@dataclass
class ForwardOutput:
    logits: Tensor
    masks: MaskMatrix
    states: list[Tensor]
    readout: Tensor
    mask_tensors: list[Tensor] = field(default_factory=list)


# ---------------------------------------------------------------------------
# layer operations


def compute_masks_layer(h_prev, m_prev, adjacency: sp.csr_matrix, params: MaskNetParams) -> Tensor:
    """Masks for one layer, every entry strictly inside (0, 1)."""
    h_prev, m_prev = T.as_tensor(h_prev), T.as_tensor(m_prev)
    if m_prev.ndim != 2 or m_prev.shape[0] != h_prev.shape[0] or m_prev.shape[1] not in (1, h_prev.shape[1]):
        raise DimensionError(f"previous masks {m_prev.shape} do not match states {h_prev.shape}")
    x = m_prev * h_prev
    own = x @ params.L1_weight + params.L1_bias
    nbr = T.neighbor_sum(x @ params.L2_weight + params.L2_bias, adjacency)
    z = T.relu(T.concat([own, nbr]))
    hidden = T.relu(z @ params.hidden_weight + params.hidden_bias)
    return T.sigmoid(hidden @ params.out_weight + params.out_bias)


def _masked_update(h_prev: Tensor, m: Tensor, adjacency, params: SmgLayerParams, activation: str, aggregator: str):
    agg = T.neighbor_sum(m * h_prev, adjacency)
    if aggregator == "mean":
        deg = np.asarray(adjacency.sum(axis=1)).reshape(-1, 1)
        agg = agg * Tensor(np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0), dtype=h_prev.dtype)
    z = m * (h_prev @ params.W1 + agg @ params.W2)
    if params.bias is not None:
        # a constant part applied after masking survives m_v = 0
        z = z + params.bias
    return ACTIVATIONS[activation](z)


def smg_layer_forward(
    h_prev,
    m,
    adjacency: sp.csr_matrix,
    params: SmgLayerParams,
    activation: str = "relu",
    aggregator: str = "sum",
) -> Tensor:
    """Scalar-mask layer; ``m`` holds one value per node (shape ``(n,)`` or ``(n, 1)``)."""
    h_prev = T.as_tensor(h_prev)
    m = T.as_tensor(m, dtype=h_prev.dtype)
    n, d = h_prev.shape
    if m.ndim == 1:
        if m.shape[0] != n:
            raise DimensionError(f"mask has {m.shape[0]} entries for {n} nodes")
        m = T.reshape(m, (n, 1))
    if m.shape != (n, 1):
        raise DimensionError(f"scalar masks must have shape ({n}, 1), got {m.shape}")
    if params.W1.shape[0] != d:
        raise DimensionError(f"layer expects width {params.W1.shape[0]}, got {d}")
    return _masked_update(h_prev, m, adjacency, params, activation, aggregator)


def mc_smg_layer_forward(
    h_prev,
    m,
    adjacency: sp.csr_matrix,
    params: SmgLayerParams,
    activation: str = "relu",
    aggregator: str = "sum",
) -> Tensor:
    """Multi-channel layer; ``m`` holds one value per node and channel (n x d)."""
    h_prev = T.as_tensor(h_prev)
    m = T.as_tensor(m, dtype=h_prev.dtype)
    if m.shape != h_prev.shape:
        raise DimensionError(f"multi-channel masks {m.shape} must match states {h_prev.shape}")
    if params.W1.shape[0] != h_prev.shape[1]:
        raise DimensionError(f"layer expects width {params.W1.shape[0]}, got {h_prev.shape[1]}")
    return _masked_update(h_prev, m, adjacency, params, activation, aggregator)


def pooling_matrix(boundaries: np.ndarray) -> sp.csr_matrix:
    boundaries = np.asarray(boundaries, dtype=np.int64)
    n = int(boundaries[-1])
    mat = sp.csr_matrix((np.ones(n), np.arange(n), boundaries), shape=(len(boundaries) - 1, n))
    mat.has_sorted_indices = True
    return mat


def readout_sum(H, boundaries) -> Tensor:
    """Per-graph column sums over each graph's node range."""
    H = T.as_tensor(H)
    boundaries = np.asarray(boundaries)
    if boundaries[0] != 0 or boundaries[-1] != H.shape[0]:
        raise DimensionError(f"boundaries {boundaries[0]}..{boundaries[-1]} do not cover {H.shape[0]} rows")
    return T.spmm(pooling_matrix(boundaries), H)


def readout_mean(H, boundaries) -> Tensor:
    """Per-graph mean; not zero invariant, kept for negative controls."""
    boundaries = np.asarray(boundaries)
    counts = np.diff(boundaries).reshape(-1, 1).astype(np.float64)
    total = readout_sum(H, boundaries)
    return total * Tensor(np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0), dtype=total.dtype)


def readout_jk(H_all: Sequence, boundaries) -> Tensor:
    """Concatenation of per-layer SUM readouts, first layer first."""
    if not H_all:
        raise ContractError("readout_jk needs at least one layer")
    n = H_all[0].shape[0]
    if any(h.shape[0] != n for h in H_all):
        raise DimensionError("all layers must have the same number of rows")
    return T.concat([readout_sum(h, boundaries) for h in H_all])


# ---------------------------------------------------------------------------
# model


class SmgModel:
    """Input transform, K soft-mask layers, readout and an affine classifier."""

    def __init__(self, config: ModelConfig, seed: int | np.random.Generator = 0):
        self.config = config
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        dt = np.dtype(config.dtype)
        d, w = config.hidden, config.mask_width

        def weight(fan_in, fan_out, name):
            return Tensor(T.glorot_uniform(rng, fan_in, fan_out, dt), requires_grad=True, name=name)

        def bias(width, name):
            return Tensor(np.zeros(width, dtype=dt), requires_grad=True, name=name)

        self.input_weight = weight(config.in_dim, d, "input.weight")
        self.input_bias = bias(d, "input.bias")
        self.layers: list[SmgLayerParams] = []
        for k in range(config.layers):
            p = f"layers.{k}"
            mask_net = MaskNetParams(
                weight(d, d, f"{p}.mask.L1.weight"),
                bias(d, f"{p}.mask.L1.bias"),
                weight(d, d, f"{p}.mask.L2.weight"),
                bias(d, f"{p}.mask.L2.bias"),
                weight(2 * d, d, f"{p}.mask.mlp.hidden.weight"),
                bias(d, f"{p}.mask.mlp.hidden.bias"),
                weight(d, w, f"{p}.mask.mlp.out.weight"),
                bias(w, f"{p}.mask.mlp.out.bias"),
            )
            layer_bias = bias(d, f"{p}.bias") if config.layer_bias else None
            self.layers.append(SmgLayerParams(weight(d, d, f"{p}.W1"), weight(d, d, f"{p}.W2"), mask_net, layer_bias))
        self.classifier_weight = weight(config.readout_dim, config.num_classes, "classifier.weight")
        self.classifier_bias = bias(config.num_classes, "classifier.bias")

    @property
    def num_layers(self) -> int:
        return self.config.layers

    def parameters(self) -> dict[str, Tensor]:
        params = {"input.weight": self.input_weight, "input.bias": self.input_bias}
        for k, layer in enumerate(self.layers):
            params.update(layer.named(f"layers.{k}"))
        params["classifier.weight"] = self.classifier_weight
        params["classifier.bias"] = self.classifier_bias
        return params

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(arrays)
        if missing:
            raise ContractError(f"missing parameters: {sorted(missing)}")
        for name, p in params.items():
            value = np.asarray(arrays[name], dtype=p.dtype)
            if value.shape != p.shape:
                raise DimensionError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data = value.copy()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def clone(self) -> "SmgModel":
        other = SmgModel(self.config)
        other.load_arrays(self.state_arrays())
        return other

    def forward(self, data, mask_override=None, training: bool = False, rng=None) -> ForwardOutput:
        return model_forward(self, data, mask_override, training, rng)

    __call__ = forward


def _check_override(model: SmgModel, override, n: int) -> np.ndarray:
    values = override.values if isinstance(override, MaskMatrix) else np.asarray(override, dtype=np.float64)
    K, d = model.num_layers, model.config.hidden
    if model.config.channel_mode == "scalar":
        if values.shape != (K, n):
            raise ContractError(f"mask override must have shape {(K, n)}, got {values.shape}")
    elif values.shape not in ((K, n), (K, n, d)):
        raise ContractError(f"mask override must have shape {(K, n)} or {(K, n, d)}, got {values.shape}")
    if np.any(values < 0) or np.any(values > 1) or np.any(~np.isfinite(values)):
        raise ContractError("mask override entries must lie in [0, 1]")
    return values


def input_states(model: SmgModel, graph: Graph) -> Tensor:
    if graph.features is None:
        raise ContractError("graph has no node features")
    x = Tensor(graph.features, dtype=model.config.dtype)
    if x.shape[1] != model.config.in_dim:
        raise DimensionError(f"features have width {x.shape[1]}, model expects {model.config.in_dim}")
    return x @ model.input_weight + model.input_bias


def run_layers(
    h: Tensor,
    adjacency: sp.csr_matrix,
    layers: Sequence[SmgLayerParams],
    config: ModelConfig,
    masks: np.ndarray | None = None,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[list[Tensor], list[Tensor]]:
    """Apply a stack of layers starting from node states ``h``.

    ``masks`` (one row per layer) replaces the mask network when given.
    Returns the per-layer node states and the masks actually used.
    """
    n = h.shape[0]
    width = config.mask_width
    dt = h.dtype
    m_prev = Tensor(np.ones((n, width), dtype=dt))
    states, used = [], []
    for k, layer in enumerate(layers):
        if masks is None:
            m = compute_masks_layer(h, m_prev, adjacency, layer.mask_net)
        else:
            mk = masks[k]
            if mk.ndim == 1:
                mk = np.repeat(mk[:, None], width, axis=1) if width > 1 else mk[:, None]
            m = Tensor(mk, dtype=dt)
        if config.channel_mode == "scalar":
            h = smg_layer_forward(h, m, adjacency, layer, config.activation, config.aggregator)
        else:
            h = mc_smg_layer_forward(h, m, adjacency, layer, config.activation, config.aggregator)
        if training and config.dropout > 0:
            if rng is None:
                raise ContractError("training with dropout needs a random generator")
            h = T.dropout(h, config.dropout, rng)
        states.append(h)
        used.append(m)
        m_prev = m
    return states, used


def model_forward(
    model: SmgModel,
    data: Batch | Graph,
    mask_override: MaskMatrix | np.ndarray | None = None,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardOutput:
    """Logits, the masks used at every layer, and the node states of every layer."""
    batch = data if isinstance(data, Batch) else make_batch([data])
    graph = batch.graph
    override = None if mask_override is None else _check_override(model, mask_override, graph.num_nodes)
    h0 = input_states(model, graph)
    states, used = run_layers(h0, graph.adjacency, model.layers, model.config, override, training, rng)
    readout = {"sum": lambda: readout_sum(states[-1], batch.boundaries),
               "mean": lambda: readout_mean(states[-1], batch.boundaries),
               "jk": lambda: readout_jk(states, batch.boundaries)}[model.config.readout]()
    logits = readout @ model.classifier_weight + model.classifier_bias
    values = np.stack([m.data for m in used])
    if model.config.channel_mode == "scalar":
        values = values[:, :, 0]
    masks = MaskMatrix(values, "manual" if override is not None else "learned")
    return ForwardOutput(logits, masks, states, readout, used)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: SmgModel, path, extra: dict | None = None) -> None:
    """Write config and parameters as JSON (floats round-trip exactly)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "params": {
            name: {"shape": list(p.shape), "data": p.data.astype(np.float64).ravel().tolist()}
            for name, p in model.parameters().items()
        },
    }
    if extra:
        payload["extra"] = extra
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path) -> SmgModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"{path} is not a soft-mask checkpoint")
    if int(payload.get("version", 0)) != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported checkpoint version {payload.get('version')}")
    model = SmgModel(ModelConfig(**payload["config"]))
    arrays = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    model.load_arrays(arrays)
    return model
