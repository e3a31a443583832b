"""Model-order selection: Lipschitz-quotient screen and description length."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .data import TrainingDataset
from .errors import ContractError
from .ident import TrainConfig, TrainReport, train

__all__ = ["OrderScan", "regressor", "lipschitz_quotient", "description_length", "select_order"]


def regressor(stsq, tvsq, r: int, t: int) -> np.ndarray:
    """``(q_st[t-r..t], q_tv[t-r..t-1])`` for a 1-based time index ``t``."""
    stsq = np.asarray(stsq, dtype=float)
    tvsq = np.asarray(getattr(tvsq, "values", tvsq), dtype=float)
    T = stsq.size
    if r < 0:
        raise ContractError("order r must be non-negative")
    if not r + 1 <= t <= T:
        raise ContractError(f"t={t} outside valid range [{r + 1}, {T}] for r={r}")
    i = t - 1
    return np.concatenate([stsq[i - r : i + 1], tvsq[i - r : i]])


def _regressor_matrix(stsq, tvsq, r):
    T = stsq.size
    cols = [stsq[r - k : T - k] for k in range(r + 1)]
    cols += [tvsq[r - k : T - k] for k in range(1, r + 1)]
    return np.column_stack(cols)


def lipschitz_quotient(stsq, tvsq, r: int) -> float:
    """Largest ``|q_tv[t1] - q_tv[t2]| / ||phi_r[t1] - phi_r[t2]||`` over pairs with ``t1, t2 > r``.

    Pairs with identical regressors and identical outputs are skipped; identical
    regressors with different outputs give ``inf``. Returns 0 when every pair is
    skipped.
    """
    stsq = np.asarray(stsq, dtype=float).reshape(-1)
    tvsq = np.asarray(getattr(tvsq, "values", tvsq), dtype=float).reshape(-1)
    if stsq.size != tvsq.size:
        raise ContractError("stsq and tvsq lengths differ")
    if r < 0:
        raise ContractError("order r must be non-negative")
    if stsq.size < r + 2:
        raise ContractError(f"need at least r+2={r + 2} samples, got {stsq.size}")
    phi = _regressor_matrix(stsq, tvsq, r)
    den = pdist(phi)
    num = pdist(tvsq[r:, None], "cityblock")
    keep = (den > 0) | (num > 0)
    if not np.any(keep):
        return 0.0
    if np.any((den == 0) & (num > 0)):
        return math.inf
    return float(np.max(num[keep] / den[keep]))


def description_length(outage: float, r: int, n_traces: int, trace_len: int) -> float:
    """``outage * (1 + (2r+1) ln(M) / M)`` with ``M = N (T - r)`` effective samples."""
    if not 0.0 <= outage <= 1.0:
        raise ContractError("outage must lie in [0, 1]")
    m = n_traces * (trace_len - r)
    if m <= 1:
        raise ContractError(f"effective sample count N(T-r)={m} must exceed 1")
    return outage * (1.0 + (2 * r + 1) * math.log(m) / m)


@dataclass
class OrderScan:
    candidates: list
    lipschitz: list
    mdl: dict = field(default_factory=dict)
    outage: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict, repr=False)
    selected: int | None = None

    def table(self) -> list[tuple]:
        """Rows ``(r, Q_lip, L_des)``; ``L_des`` is ``None`` for untrained candidates."""
        return [(r, q, self.mdl.get(r)) for r, q in zip(self.candidates, self.lipschitz)]

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "kind": "tvsq.OrderScan",
            "candidates": list(self.candidates),
            "lipschitz": [None if math.isinf(q) else q for q in self.lipschitz],
            "mdl": {str(r): v for r, v in self.mdl.items()},
            "outage": {str(r): v for r, v in self.outage.items()},
            "selected": self.selected,
        }


def dataset_lipschitz(data: TrainingDataset, r: int) -> float:
    """Maximum Lipschitz quotient over the traces of a dataset."""
    return max(lipschitz_quotient(it.stsq, it.tvsq.values, r) for it in data.items)


def select_order(data: TrainingDataset, r_range, config: TrainConfig = TrainConfig(),
                 train_fn=train) -> OrderScan:
    """Train every candidate order and keep the one with the smallest description length.

    Ties go to the smaller order.
    """
    candidates = sorted({int(r) for r in r_range})
    if not candidates:
        raise ContractError("r_range must not be empty")
    if candidates[0] < 1 or candidates[-1] >= data.length:
        raise ContractError(f"candidate orders must lie in [1, {data.length - 1}]")
    scan = OrderScan(candidates, [dataset_lipschitz(data, r) for r in candidates])
    best = None
    for r in candidates:
        report: TrainReport = train_fn(data, r, config)
        scan.reports[r] = report
        scan.outage[r] = report.final_outage
        scan.mdl[r] = description_length(report.final_outage, r, data.n_traces, data.length)
        if best is None or scan.mdl[r] < scan.mdl[best]:
            best = r
    scan.selected = best
    return scan
