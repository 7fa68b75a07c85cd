"""Export per-layer mask weights as node-coloured Graphviz DOT files."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError
from .graph import Graph

# graphs above this size get the force-directed sfdp hint instead of neato
LARGE_GRAPH_NODES = 100


@dataclass(frozen=True, eq=False)
class MaskSnapshot:
    """Mask values of one graph, shape ``(num_layers, num_nodes)``."""

    graph_id: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ContractError("snapshot values must be (layers, nodes)")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ContractError("mask values must lie in [0, 1]")

    @property
    def num_layers(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_masks(cls, graph_id: int, masks: np.ndarray) -> "MaskSnapshot":
        """Accepts ``(K, n)`` or multi-channel ``(K, n, d)``; channels are averaged."""
        masks = np.asarray(masks, dtype=np.float64)
        if masks.ndim == 3:
            masks = masks.mean(axis=2)
        return cls(graph_id, masks)


def gray_level(mask: float) -> int:
    """``round_half_up(255 * (1 - mask))``: mask 1 is black, mask 0 white."""
    return int(math.floor(255.0 * (1.0 - float(mask)) + 0.5))


def fill_color(mask: float) -> str:
    g = gray_level(mask)
    return f"#{g:02X}{g:02X}{g:02X}"


def dot_source(graph: Graph, snapshot: MaskSnapshot, layer_index: int) -> str:
    if not 0 <= layer_index < snapshot.num_layers:
        raise ContractError(f"layer_index {layer_index} outside 0..{snapshot.num_layers - 1}")
    if snapshot.values.shape[1] != graph.num_nodes:
        raise ContractError("snapshot does not match the graph's node count")
    engine = "sfdp" if graph.num_nodes > LARGE_GRAPH_NODES else "neato"
    values = snapshot.values[layer_index]
    lines = [
        f"graph graph_{snapshot.graph_id}_layer_{layer_index + 1} {{",
        f'  graph [comment="layout={engine}"];',
        '  node [style=filled, shape=circle, fontsize=8];',
    ]
    for v in range(graph.num_nodes):
        fg = "white" if values[v] > 0.5 else "black"
        lines.append(f'  {v} [fillcolor="{fill_color(values[v])}", fontcolor={fg}, mask="{values[v]:.6f}"];')
    for u, v in graph.edges():
        lines.append(f"  {u} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: Graph, snapshot: MaskSnapshot, layer_index: int, out_path) -> Path:
    """Write one layer of ``snapshot`` as DOT; ``layer_index`` is 0-based."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(dot_source(graph, snapshot, layer_index))
    return out_path


def export_snapshot(model, graph: Graph, out_dir) -> list[Path]:
    """Run ``model`` on ``graph`` and write ``graph_{id}_layer_{k}.dot`` for every layer (k from 1)."""
    from .layers import model_forward
    from .tensor import no_grad

    with no_grad():
        out = model_forward(model, graph)
    snapshot = MaskSnapshot.from_masks(graph.id, out.masks.values)
    out_dir = Path(out_dir)
    return [
        export_dot(graph, snapshot, k, out_dir / f"graph_{graph.id}_layer_{k + 1}.dot")
        for k in range(snapshot.num_layers)
    ]
