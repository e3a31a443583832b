"""Trace containers shared by identification, order selection and I/O."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

__all__ = ["TVSQTrace", "TraceRecord", "TrainingDataset"]


def _series(x, name):
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size < 1:
        raise ContractError(f"{name} must contain at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TVSQTrace:
    """Measured time-varying quality with per-second 95% confidence half-widths."""

    values: np.ndarray
    ci: np.ndarray

    def __post_init__(self):
        values = _series(self.values, "tvsq")
        ci = _series(self.ci, "ci")
        if ci.size != values.size:
            raise ContractError(f"tvsq and ci lengths differ ({values.size} vs {ci.size})")
        if np.any(ci <= 0):
            raise ContractError("confidence half-widths must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ci", ci)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class TraceRecord:
    """One training item: input quality trace and the measured response."""

    stsq: np.ndarray
    tvsq: TVSQTrace
    name: str = ""
    group: str = ""

    def __post_init__(self):
        stsq = _series(self.stsq, "stsq")
        if stsq.size != len(self.tvsq):
            raise ContractError(f"stsq and tvsq lengths differ ({stsq.size} vs {len(self.tvsq)})")
        object.__setattr__(self, "stsq", stsq)


@dataclass(frozen=True)
class TrainingDataset:
    """``N`` traces of common length ``T``, stored as stacked ``(N, T)`` arrays."""

    items: tuple[TraceRecord, ...]
    stsq: np.ndarray = field(init=False, repr=False)
    tvsq: np.ndarray = field(init=False, repr=False)
    ci: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ContractError("dataset needs at least one trace")
        lengths = {len(it.tvsq) for it in items}
        if len(lengths) != 1:
            raise ContractError(f"all traces must share one length, got {sorted(lengths)}")
        object.__setattr__(self, "items", items)
        for name, get in (("stsq", lambda it: it.stsq), ("tvsq", lambda it: it.tvsq.values),
                          ("ci", lambda it: it.tvsq.ci)):
            arr = np.stack([get(it) for it in items])
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, stsq, tvsq, ci, names=None, groups=None) -> "TrainingDataset":
        stsq = np.atleast_2d(np.asarray(stsq, dtype=float))
        tvsq = np.atleast_2d(np.asarray(tvsq, dtype=float))
        ci = np.broadcast_to(np.asarray(ci, dtype=float), tvsq.shape)
        n = stsq.shape[0]
        names = names if names is not None else [f"trace{i + 1:03d}" for i in range(n)]
        groups = groups if groups is not None else [""] * n
        return cls(tuple(
            TraceRecord(stsq[i], TVSQTrace(tvsq[i], ci[i]), name=str(names[i]), group=str(groups[i]))
            for i in range(n)
        ))

    @property
    def n_traces(self) -> int:
        return len(self.items)

    @property
    def length(self) -> int:
        return self.stsq.shape[1]

    def subset(self, indices) -> "TrainingDataset":
        return TrainingDataset(tuple(self.items[i] for i in indices))

    def groups(self) -> list[str]:
        return [it.group for it in self.items]
