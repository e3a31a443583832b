"""Prediction metrics, windowed pooling baselines and leave-one-group-out evaluation."""
from __future__ import annotations

import logging
import math
import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .data import TrainingDataset
from .errors import ContractError
from .ident import TrainConfig, train
from .model import INVERSION_MARGIN, HWParams, pinned_latents, simulate

__all__ = [
    "POOLING_METHODS",
    "POOLING_WINDOW",
    "pool_window",
    "correlations",
    "trace_metrics",
    "predict_dataset",
    "evaluate",
    "leave_one_group_out",
]

log = logging.getLogger(__name__)

POOLING_WINDOW = 12
POOLING_METHODS = ("max", "min", "median", "mean")
_REDUCERS = {"max": np.max, "min": np.min, "median": np.median, "mean": np.mean}


def pool_window(stsq, method: str, window: int = POOLING_WINDOW) -> np.ndarray:
    """Sliding pooling ``y[t] = agg(stsq[t-window+1 .. t])`` along the last axis.

    The first ``window - 1`` samples have no full window and are NaN.
    """
    if method not in _REDUCERS:
        raise ContractError(f"unknown pooling method {method!r}; choose from {POOLING_METHODS}")
    if window < 1:
        raise ContractError("window must be at least 1")
    q = np.asarray(stsq, dtype=float)
    out = np.full(q.shape, np.nan)
    if q.shape[-1] >= window:
        out[..., window - 1 :] = _REDUCERS[method](sliding_window_view(q, window, axis=-1), axis=-1)
    return out


def correlations(pred, meas) -> dict:
    """Pearson and Spearman (average ranks for ties) of flattened samples.

    A constant input makes a coefficient undefined; it is reported as ``None``
    and a warning is logged.
    """
    x = np.asarray(pred, dtype=float).reshape(-1)
    y = np.asarray(meas, dtype=float).reshape(-1)
    out = {"pearson": None, "spearman": None}
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        log.warning("correlation undefined for a constant series; reporting null")
        return out
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pr = stats.pearsonr(x, y)[0]
        sr = stats.spearmanr(x, y)[0]
    out["pearson"] = None if math.isnan(pr) else float(pr)
    out["spearman"] = None if math.isnan(sr) else float(sr)
    return out


def trace_metrics(pred, meas, ci) -> dict:
    """Outage rate and correlations for samples already restricted to the evaluation range."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    ci = np.broadcast_to(np.asarray(ci, dtype=float), meas.shape)
    if pred.shape != meas.shape or pred.size == 0:
        raise ContractError("prediction and measurement must be non-empty and of equal shape")
    outage = float(np.mean(np.abs(pred - meas) > 2 * ci))
    return {"outage": outage, **correlations(pred, meas)}


def predict_dataset(params: HWParams, data: TrainingDataset, margin: float = INVERSION_MARGIN) -> np.ndarray:
    """Predictions for every trace, initialised from the first ``r`` measured samples."""
    v_init = pinned_latents(data.tvsq, params.gamma, params.r, margin)
    return simulate(data.stsq, params, v_init).values


def _summary(pred, meas, ci, names, start):
    per = {name: trace_metrics(p[start:], m[start:], c[start:])
           for name, p, m, c in zip(names, pred, meas, ci)}
    pooled = trace_metrics(pred[:, start:], meas[:, start:], ci[:, start:])
    mean = {}
    for key in ("outage", "pearson", "spearman"):
        vals = [v[key] for v in per.values() if v[key] is not None]
        mean[key] = float(np.mean(vals)) if vals else None
    return {"pooled": pooled, "mean": mean, "per_trace": per}


def evaluate(params: HWParams, data: TrainingDataset, *, baselines: bool = True,
             margin: float = INVERSION_MARGIN) -> dict:
    """Model metrics and, optionally, pooling-baseline metrics on a dataset.

    Model metrics use every sample after the ``r`` warm-up seconds. When
    baselines are requested, every method (the model included) is also scored
    on the common range after ``max(r, window - 1)`` seconds so the rows are
    comparable; those figures appear under ``"common_range"``.
    """
    names = [it.name or f"trace{k + 1:03d}" for k, it in enumerate(data.items)]
    pred = predict_dataset(params, data, margin)
    result = {"r": params.r, "n_traces": data.n_traces,
              "model": _summary(pred, data.tvsq, data.ci, names, params.r)}
    if baselines:
        start = max(params.r, POOLING_WINDOW - 1)
        if start >= data.length:
            raise ContractError(f"traces of length {data.length} are too short for "
                                f"{POOLING_WINDOW}-second pooling")
        common = {"start": start + 1,
                  "model": _summary(pred, data.tvsq, data.ci, names, start)}
        for method in POOLING_METHODS:
            pooled = pool_window(data.stsq, method)
            common[method] = _summary(pooled, data.tvsq, data.ci, names, start)
        result["common_range"] = common
    return result


def leave_one_group_out(data: TrainingDataset, r: int, config: TrainConfig = TrainConfig(),
                        train_fn=train) -> dict:
    """Train on all groups but one and evaluate on the held-out group, for every group."""
    groups = data.groups()
    labels = list(dict.fromkeys(groups))
    if len(labels) < 2:
        raise ContractError("leave-one-group-out needs at least two distinct groups")
    folds = {}
    for g in labels:
        train_idx = [k for k, x in enumerate(groups) if x != g]
        test_idx = [k for k, x in enumerate(groups) if x == g]
        report = train_fn(data.subset(train_idx), r, config)
        folds[g] = {
            "train_outage": report.final_outage,
            "warnings": list(report.warnings),
            "theta": report.theta_star.to_dict(),
            "test": evaluate(report.theta_star, data.subset(test_idx), baselines=False,
                             margin=config.inversion_margin)["model"],
        }
    mean = {}
    for key in ("outage", "pearson", "spearman"):
        vals = [f["test"]["pooled"][key] for f in folds.values() if f["test"]["pooled"][key] is not None]
        mean[key] = float(np.mean(vals)) if vals else None
    return {"r": r, "folds": folds, "mean": mean}
