"""
Simulating a quality model and reading its memory
=================================================

A model maps the per-second quality of each video chunk (STSQ) to the quality a
viewer reports while watching (TVSQ). Here we build one by hand, drive it with
a quality drop, and look at how long it remembers the past.
"""
import math

import numpy as np

from tvsq import HWParams, simulate
from tvsq.analysis import initial_state_decay, memory_constant, stability_report

# %% A second-order model with sluggish feedback.
# b weights the current and past inputs, f feeds back past outputs.
params = HWParams(b=(0.10, 0.15, 0.10), f=(0.55, 0.10),
                  beta=(0.04, -2.0, 0.0, 108.5), gamma=(0.04, -2.0, 0.0, 108.5))
print(f"root radius rho = {params.rho:.3f}, memory tau = {memory_constant(params.f):.2f} s")

# %% Drive it with 20 s of good quality, 10 s of bad, then good again.
stsq = np.r_[np.full(20, 70.0), np.full(10, 35.0), np.full(30, 70.0)]
pred = simulate(stsq, params, init="hold")
for t in (19, 22, 25, 29, 32, 36, 45, 59):
    print(f"t={t + 1:>2}s  stsq={stsq[t]:5.1f}  predicted tvsq={pred.values[t]:6.2f}")

# The response lags the drop and recovers more slowly than the input: the
# filter's memory smooths abrupt changes.

# %% How fast does the starting state wash out?
# Two runs that differ only in their initial latent state converge at the rate
# rho ** t. After tau seconds the gap has shrunk to about e**-3 of its start.
gap = initial_state_decay(params, stsq, "zero", "hold")
tau = memory_constant(params.f)
k = params.r + math.ceil(tau)
print(f"gap at t=r+1: {gap[params.r]:.3f}; at t=r+ceil(tau): {gap[k - 1]:.4f}; "
      f"after 4 tau: {gap[params.r + math.ceil(4 * tau)]:.2e}")

# %% The full stability report bundles the impulse response and output bounds.
report = stability_report(params)
lo, hi = report.output_range
print(f"impulse response: {report.impulse.size} taps, l1 norm {report.l1_norm:.3f}, "
      f"peak at lag {report.peak_lag}")
print(f"for any input in [0, 100] the prediction stays in [{lo:.2f}, {hi:.2f}]")
