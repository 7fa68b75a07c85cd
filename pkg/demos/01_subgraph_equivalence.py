"""
Selecting a subgraph with hand-built masks
==========================================

A soft-mask network run on a whole graph can reproduce, exactly, the same
network run on an induced subgraph.  We pick a subgraph, build the masks
that select it and compare node states and graph readouts.
"""

import numpy as np

from smg import Graph, SubgraphSelection, model_forward
from smg.theory import Fill, LemmaMaskSpec, check_lemma1, check_theorem1, lemma1_masks, oracle_subgraph_states, random_model, theorem1_masks

# two triangles joined by a bridge 2-3; we keep the left triangle
g = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)],
                     features=np.random.default_rng(0).standard_normal((6, 4)))
members = {0, 1, 2}
model = random_model(np.random.default_rng(1), in_dim=4, hidden=8, layers=3)

# node 3 is the only outsider touching the triangle: it is switched off at layers 1 and 3
spec = LemmaMaskSpec(g, SubgraphSelection(g, frozenset(members)), K=3)
node_masks = lemma1_masks(spec)
print("node-level masks (rows are layers):\n", node_masks)

full = model_forward(model, g, node_masks).states[-1].data
oracle = oracle_subgraph_states(g, members, model)
print("max |difference| on the triangle:", np.abs(full[[0, 1, 2]] - oracle.states[-1]).max())

# entries the construction leaves free can hold anything in [0, 1]
random_fill = lemma1_masks(LemmaMaskSpec(g, spec.selection, 3, Fill.random(7)))
print("a different valid mask matrix:\n", random_fill.round(2))
print("worst node error over both fills:", check_lemma1(g, members, model).max_abs_diff)

# for the graph readout every outsider must also be silent at the last layer
print("graph-level masks:\n", theorem1_masks(spec))
print("readout error:", check_theorem1(g, members, model).max_abs_diff)
