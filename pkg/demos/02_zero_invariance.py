"""
Why the readout must ignore zero vectors
========================================

Masked-out nodes end with all-zero states.  A SUM readout does not notice
them; a MEAN readout divides by their count and drifts away from the
subgraph's own readout.
"""

import numpy as np

from smg.graph import Graph
from smg.theory import check_theorem1, random_model, zero_invariance_probe

print("sum :", zero_invariance_probe("sum"))
verdict = zero_invariance_probe("mean")
print("mean:", verdict["zero_invariant"], "witness values", verdict["witness"]["values"])

g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], features=np.ones((5, 2)))
for readout in ("sum", "mean"):
    model = random_model(np.random.default_rng(3), 2, 4, 2, readout=readout)
    report = check_theorem1(g, {0, 1}, model, allow_non_zero_invariant=True)
    print(f"{readout:>4} readout: subgraph vs masked graph differ by {report.max_abs_diff:.3g}")
