"""
Looking at learned masks
========================

Train briefly on MUTAG, then write one Graphviz file per layer.  Darker
nodes have masks near 1.  Render with ``neato -Tpng graph_0_layer_1.dot``.
"""

from pathlib import Path

import numpy as np

from smg.layers import SmgModel
from smg.optim import AdamState
from smg.train import TrainConfig, train_epoch
from smg.tu import load_tu_dataset
from smg.viz import export_snapshot

graphs = load_tu_dataset(Path(__file__).resolve().parents[1] / "data" / "MUTAG")
cfg = TrainConfig(epochs=20)
model = SmgModel(cfg.model_config(graphs[0].features.shape[1], 2), seed=0)
opt, rng = AdamState(lr=cfg.lr), np.random.default_rng(0)
for epoch in range(cfg.epochs):
    m = train_epoch(model, graphs, opt, cfg, epoch, rng)
print(f"after {cfg.epochs} epochs: loss {m.loss:.3f}, train accuracy {m.accuracy:.3f}")

for path in export_snapshot(model, graphs[0], "runs/demo_masks"):
    print("wrote", path)
print(path.read_text()[:300])
