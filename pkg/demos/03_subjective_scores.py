"""
From slider scores to a quality trace
=====================================

Subjects move a slider while watching; each second gives one score per subject.
This walk-through turns a panel of such scores into a mean quality trace with
confidence half-widths, after per-subject normalisation and outlier rejection.
"""
import numpy as np

from tvsq.dataprep import (
    SubjectScorePanel,
    aggregate_tvsq,
    detect_outliers,
    dmos_from_rred,
    offset_scores,
    quantize_to_levels,
    rdmos_from_dmos,
    zscore_normalize,
)

rng = np.random.default_rng(0)

# %% A panel: 20 subjects, 2 videos, 30 seconds.
# Each subject has a personal bias and slider range; subject 7 is inattentive.
n_sub, n_vid, T = 20, 2, 30
true_quality = np.stack([np.r_[np.full(15, 65.0), np.full(15, 40.0)],
                         np.linspace(70.0, 35.0, T)])
bias = rng.normal(0, 6, n_sub)[:, None, None]
spread = rng.uniform(0.7, 1.3, n_sub)[:, None, None]
scores = 50 + spread * (true_quality[None] - 50) + bias + rng.normal(0, 3, (n_sub, n_vid, T))
scores[6] = rng.uniform(0, 100, (n_vid, T))
ref = np.clip(85 + bias[:, :, 0] + rng.normal(0, 2, (n_sub, T)), 0, 100)
panel = SubjectScorePanel(np.clip(scores, 0, 100), ref, video_names=("steps", "ramp"))

# %% Step by step: offset against the reference video, Z-score, flag outliers.
z, stats = zscore_normalize(offset_scores(panel.scores, panel.ref_scores))
outliers = detect_outliers(z)
print("subject means after offsetting:", np.round(stats.subject_mean[:5], 1), "...")
print(f"outlier share: all subjects {outliers.mean():.3f}, subject 7 {outliers[6].mean():.3f}")

# %% The whole pipeline in one call.
traces, agg = aggregate_tvsq(panel)
for name, tr in zip(panel.video_names, traces):
    print(f"{name:>5}: t=1 {tr.values[0]:5.1f} +- {tr.ci[0]:.1f}, "
          f"t=15 {tr.values[14]:5.1f}, t=30 {tr.values[-1]:5.1f} +- {tr.ci[-1]:.1f}")

# %% Objective quality scores map onto the same scale.
rred = np.array([0.0, 0.5, 2.0, 8.0])
print("RRED -> RDMOS:", np.round(rdmos_from_dmos(dmos_from_rred(rred)), 2))

# %% Designing a stimulus from a bank of encoded versions.
# Each row is one encoding level's per-second quality; pick the closest per second.
bank = np.stack([np.full(T, q) for q in (30.0, 45.0, 60.0, 75.0)]) + rng.normal(0, 1, (4, T))
target = traces[1].values
idx, achieved = quantize_to_levels(target, bank)
print("chosen levels:", idx.tolist())
print(f"worst quantisation error: {np.max(np.abs(achieved - target)):.2f}")
