"""
Choosing the filter order
=========================

Longer filters fit better but cost parameters. Two screens help pick the
order r: the Lipschitz quotient, which stops falling once the regressor holds
enough of the past, and a description length that charges each extra
parameter against the fit.
"""
import time

import numpy as np

from tvsq import GroundTruthSpec, HWParams, TargetSpec, generate_ground_truth
from tvsq.order import select_order

# %% Data from a third-order model with substantial feedback.
f = np.array([0.7, 0.1, -0.2])
b = np.array([0.0, 0.0, 0.25, 0.15])
b *= 1.2 * (1 - f.sum()) / b.sum()
truth = HWParams(b=b, f=f, beta=(0.04, -1.0, 0.0, 100.0), gamma=(0.04, -2.0, 0.0, 100.0))
data = generate_ground_truth(GroundTruthSpec(truth, n_traces=6, target=TargetSpec(seed=3))).dataset

# %% Train one model per candidate order and compare.
start = time.perf_counter()
scan = select_order(data, range(1, 5))
print(f"scan took {time.perf_counter() - start:.0f} s")
print(f"{'r':>3} {'Lipschitz':>10} {'outage':>8} {'descr. length':>14}")
for r, q, mdl in scan.table():
    print(f"{r:>3} {q:10.3f} {scan.outage[r]:8.4f} {mdl:14.5f}")
print(f"selected order: {scan.selected} (true order 3)")
