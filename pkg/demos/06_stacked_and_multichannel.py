"""
Stacking mask segments and per-channel masks
============================================

Running the layers as separately masked segments gives the same states as
one run with the stacked mask matrix.  A multi-channel model whose masks
repeat one value across channels behaves exactly like the scalar model.
"""

import numpy as np

from smg import ModelConfig, SmgModel, model_forward
from smg.graph import erdos_renyi
from smg.theory import random_model, stacked_composition_check

rng = np.random.default_rng(0)
g = erdos_renyi(10, 0.3, rng, feature_dim=3)
model = random_model(rng, 3, hidden=4, layers=4)
blocks = [rng.uniform(size=(2, 10)), rng.uniform(size=(1, 10)), rng.uniform(size=(1, 10))]
print("segments 2+1+1 vs one stack:", stacked_composition_check(model, g, [2, 1, 1], blocks).max_abs_diff)

multi = SmgModel(ModelConfig(in_dim=3, hidden=4, layers=4, channel_mode="multi"))
multi.load_arrays({**multi.state_arrays(),
                   **{k: v for k, v in model.state_arrays().items() if ".mask.mlp.out." not in k}})
masks = np.vstack(blocks)
a = model_forward(model, g, masks).logits.data
b = model_forward(multi, g, np.repeat(masks[:, :, None], 4, axis=2)).logits.data
print("scalar vs replicated multi-channel logits:", np.abs(a - b).max())
