"""Subjective-score preprocessing: score maps, Z-scores, outlier rejection, aggregation.

Panels are dense arrays ``c[i, j, t]`` (subject, video, second) with a matching
reference-video panel ``c_ref[i, t]``. Aggregation turns a panel into one
:class:`~tvsq.data.TVSQTrace` per video.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import TVSQTrace
from .errors import AggregationError, ContractError, DegenerateSubjectError

__all__ = [
    "SubjectScorePanel",
    "ZScoreStats",
    "dmos_from_rred",
    "rdmos_from_dmos",
    "offset_scores",
    "zscore_normalize",
    "detect_outliers",
    "aggregate_tvsq",
    "quantize_to_levels",
    "confidence_halfwidth",
    "load_dataset",
    "save_dataset",
]

log = logging.getLogger(__name__)

Z_RANGE = 4.0


def dmos_from_rred(rred):
    """Map an RRED distortion index to DMOS: ``16.4769 + 9.7111 ln(1 + rred / 0.6444)``."""
    x = np.asarray(rred, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ContractError("rred must be finite and non-negative")
    out = 16.4769 + 9.7111 * np.log1p(x / 0.6444)
    return float(out) if out.ndim == 0 else out


def rdmos_from_dmos(dmos):
    """Reversed DMOS, ``100 - dmos``; higher means better quality."""
    out = 100.0 - np.asarray(dmos, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SubjectScorePanel:
    """Slider scores of ``I`` subjects on ``J`` videos of ``T`` seconds, plus the reference video."""

    scores: np.ndarray
    ref_scores: np.ndarray
    session: str = ""
    video_names: tuple = ()

    def __post_init__(self):
        c = np.array(self.scores, dtype=float)
        ref = np.array(self.ref_scores, dtype=float)
        if c.ndim != 3:
            raise ContractError(f"scores must have shape (I, J, T), got {c.shape}")
        if ref.shape != (c.shape[0], c.shape[2]):
            raise ContractError(f"ref_scores must have shape {(c.shape[0], c.shape[2])}, got {ref.shape}")
        if c.shape[0] < 2:
            raise ContractError("a panel needs at least two subjects")
        for name, arr in (("scores", c), ("ref_scores", ref)):
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 100:
                raise ContractError(f"{name} must be finite and within [0, 100]")
        names = tuple(self.video_names) or tuple(f"video{j + 1:03d}" for j in range(c.shape[1]))
        if len(names) != c.shape[1]:
            raise ContractError("one video name per video is required")
        c.setflags(write=False)
        ref.setflags(write=False)
        object.__setattr__(self, "scores", c)
        object.__setattr__(self, "ref_scores", ref)
        object.__setattr__(self, "video_names", names)

    @property
    def n_subjects(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class ZScoreStats:
    subject_mean: np.ndarray   # (I,)
    subject_std: np.ndarray    # (I,)
    mean: np.ndarray | None = None      # (J, T), across subjects
    std: np.ndarray | None = None       # (J, T), across subjects
    outliers: np.ndarray | None = None  # (I, J, T) boolean mask


def offset_scores(scores, ref_scores) -> np.ndarray:
    """``100 - (c_ref[i, t] - c[i, j, t])``: scores relative to the subject's reference rating."""
    c = np.asarray(scores, dtype=float)
    ref = np.asarray(ref_scores, dtype=float)
    if c.ndim != 3 or ref.shape != (c.shape[0], c.shape[2]):
        raise ContractError(f"reference shape {ref.shape} does not match panel shape {c.shape}")
    return 100.0 - (ref[:, None, :] - c)


def _subject_stats(c, keep=None):
    n_sub = c.shape[0]
    flat = c.reshape(n_sub, -1)
    mask = np.ones_like(flat, dtype=bool) if keep is None else keep.reshape(n_sub, -1)
    m = np.empty(n_sub)
    s = np.empty(n_sub)
    for i in range(n_sub):
        x = flat[i, mask[i]]
        if x.size < 2:
            raise DegenerateSubjectError(i + 1)
        m[i] = x.mean()
        s[i] = x.std(ddof=1)
        if not s[i] > 0:
            raise DegenerateSubjectError(i + 1)
    return m, s


def zscore_normalize(offset):
    """Per-subject Z-scores over all videos and seconds (unbiased standard deviation).

    Returns ``(z, stats)``; subjects are reported 1-based in errors.
    """
    c = np.asarray(offset, dtype=float)
    if c.ndim != 3:
        raise ContractError(f"expected an (I, J, T) array, got shape {c.shape}")
    m, s = _subject_stats(c)
    z = (c - m[:, None, None]) / s[:, None, None]
    return z, ZScoreStats(m, s)


def detect_outliers(z) -> np.ndarray:
    """Boolean mask ``(I, J, T)``: subject ``i`` lies outside ``mu +- 2 eta`` at ``(j, t)``.

    ``mu`` and ``eta`` are the mean and unbiased standard deviation across subjects.
    """
    z = np.asarray(z, dtype=float)
    mu = z.mean(axis=0)
    eta = z.std(axis=0, ddof=1)
    return (z > mu + 2 * eta) | (z < mu - 2 * eta)


def confidence_halfwidth(eta, n_kept):
    """95% half-width in RDMOS units: ``1.96 eta / sqrt(n_kept) / 8 * 100``."""
    return 1.96 * np.asarray(eta, dtype=float) / np.sqrt(n_kept) / (2 * Z_RANGE) * 100.0


def aggregate_tvsq(panel: SubjectScorePanel):
    """Per-video TVSQ traces with confidence half-widths.

    Outliers are flagged once on the full Z-scores. Each subject's mean and
    deviation are then recomputed over its retained samples only, the Z-scores
    rebuilt, and the retained Z-scores averaged per second. The mean Z-score is
    mapped from ``[-4, 4]`` onto ``[0, 100]``; values outside that range are
    clamped with a warning.

    Returns ``(traces, stats)`` with one :class:`TVSQTrace` per video.
    """
    c = offset_scores(panel.scores, panel.ref_scores)
    z, _ = zscore_normalize(c)
    out = detect_outliers(z)
    keep = ~out
    n_kept = keep.sum(axis=0)
    if np.any(n_kept == 0):
        j, t = np.argwhere(n_kept == 0)[0]
        raise AggregationError(panel.video_names[j], int(t) + 1)
    m, s = _subject_stats(c, keep)
    z2 = (c - m[:, None, None]) / s[:, None, None]
    zk = np.where(keep, z2, 0.0)
    zbar = zk.sum(axis=0) / n_kept
    dev = np.where(keep, z2 - zbar, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.sqrt((dev**2).sum(axis=0) / (n_kept - 1))
    if np.any(n_kept < 2) or np.any(eta <= 0):
        j, t = np.argwhere((n_kept < 2) | ~(eta > 0))[0]
        reason = "fewer than two subjects kept" if n_kept[j, t] < 2 else "retained scores have zero spread"
        raise AggregationError(panel.video_names[j], int(t) + 1, reason)
    if np.any(np.abs(zbar) > Z_RANGE):
        log.warning("%d mean Z-scores outside [-4, 4] were clamped", int(np.sum(np.abs(zbar) > Z_RANGE)))
        zbar = np.clip(zbar, -Z_RANGE, Z_RANGE)
    q_tv = (zbar + Z_RANGE) / (2 * Z_RANGE) * 100.0
    ci = confidence_halfwidth(eta, n_kept)
    traces = [TVSQTrace(q_tv[j], ci[j]) for j in range(q_tv.shape[0])]
    return traces, ZScoreStats(m, s, zbar, eta, out)


def quantize_to_levels(target, bank):
    """Pick, per second, the bank level closest to the target (ties go to the lower index).

    ``bank`` has shape ``(L, T)``. Returns ``(indices, achieved)``.
    """
    q = np.asarray(target, dtype=float).reshape(-1)
    levels = np.atleast_2d(np.asarray(bank, dtype=float))
    if levels.shape[1] != q.size:
        raise ContractError(f"bank length {levels.shape[1]} does not match target length {q.size}")
    if not np.all(np.isfinite(levels)):
        raise ContractError("bank levels must be finite")
    idx = np.argmin(np.abs(levels - q), axis=0)  # argmin returns the first minimum
    return idx, levels[idx, np.arange(q.size)]


def load_dataset(path):
    """Read a dataset manifest or a single trace CSV; see :mod:`tvsq.io` for the formats."""
    from .io import load_dataset as _load  # io depends on this module

    return _load(path)


def save_dataset(path, data, session: dict | None = None):
    """Write a dataset manifest with one trace CSV per record; see :mod:`tvsq.io`."""
    from .io import save_dataset as _save

    _save(path, data, session)
