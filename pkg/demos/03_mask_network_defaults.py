"""
The mask network at initialisation
==================================

With zero input and zero biases every mask is sigmoid(0) = 0.5, so an
untrained mask network neither keeps nor drops any node.  Once inputs and
biases move, masks spread out but never reach 0 or 1 exactly.
"""

import numpy as np

from smg import Graph, ModelConfig, SmgModel, model_forward

g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)], features=np.zeros((4, 3)))
model = SmgModel(ModelConfig(in_dim=3, hidden=8, layers=3), seed=0)
print("zero input:\n", model_forward(model, g).masks.values)

g = g.with_features(np.random.default_rng(0).standard_normal((4, 3)))
for layer in model.layers:
    layer.mask_net.out_bias.data[:] = 40.0
masks = model_forward(model, g).masks.values
print("large positive bias: min", masks.min(), "max", masks.max(), "(still below 1)")
