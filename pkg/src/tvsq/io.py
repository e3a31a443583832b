"""CSV and JSON formats for traces, subject panels, datasets, models and reports.

* Trace CSV: header ``t,stsq,tvsq,ci``; ``t`` counts seconds from 1.
* Prediction CSV: header ``t,tvsq_pred,warmup``; ``warmup`` is 1 on rows set
  by the initial state rather than the recursion.
* Panel CSV: header ``subject,video,t,score``; the reference video goes in a
  separate ``subject,t,score`` file. Subjects and seconds count from 1.
* Dataset manifest JSON: ``{"version": 1, "kind": "tvsq.Dataset", "session":
  {...}, "traces": [{"name", "path", "group"}, ...]}`` with paths relative to
  the manifest.

Floats are written with ``repr`` so reading a file back reproduces every value
exactly. Both LF and CRLF line endings are accepted.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .data import TrainingDataset, TraceRecord, TVSQTrace
from .dataprep import SubjectScorePanel
from .errors import ContractError, DatasetFormatError
from .model import HWParams

__all__ = [
    "read_trace_csv",
    "write_trace_csv",
    "read_stsq_csv",
    "write_prediction_csv",
    "read_panel_csv",
    "read_long_stsq",
    "write_panel_csv",
    "load_dataset",
    "save_dataset",
    "load_model",
    "save_model",
    "read_json",
    "write_json",
    "write_xy_csv",
]

MANIFEST_VERSION = 1
MODEL_VERSION = 1


def _fmt(x) -> str:
    return repr(float(x))


def _rows(path, required):
    """Yield ``(line_no, {column: text})`` after checking the header."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read file: {exc.strerror}", path) from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetFormatError("file is empty or has no header", path, 1)
    header = [h.strip() for h in next(csv.reader([lines[0]]))]
    for col in required:
        if col not in header:
            raise DatasetFormatError(f"missing column {col!r} (header is {','.join(header)})", path, 1)
    out = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = next(csv.reader([line]))
        if len(cells) != len(header):
            raise DatasetFormatError(f"expected {len(header)} fields, found {len(cells)}", path, no)
        out.append((no, dict(zip(header, cells)), header))
    if not out:
        raise DatasetFormatError("file has a header but no data rows", path, 2)
    return out


def _float(path, no, header, row, col):
    try:
        x = float(row[col])
    except ValueError:
        raise DatasetFormatError(f"{col}: cannot parse {row[col]!r} as a number",
                                 path, no, header.index(col) + 1) from None
    if not math.isfinite(x):
        raise DatasetFormatError(f"{col}: non-finite value {row[col]!r}", path, no, header.index(col) + 1)
    return x


def _int(path, no, header, row, col):
    text = row[col].strip()
    try:
        return int(text)
    except ValueError:
        raise DatasetFormatError(f"{col}: expected an integer, got {text!r}",
                                 path, no, header.index(col) + 1) from None


def _check_time(path, rows, ts):
    for k, ((no, _, header), t) in enumerate(zip(rows, ts)):
        if t != k + 1:
            raise DatasetFormatError(f"t must count 1, 2, ... in order; found {t} at position {k + 1}",
                                     path, no, header.index("t") + 1)


def _read_columns(path, cols):
    rows = _rows(path, ("t",) + cols)
    ts = [_int(path, no, h, row, "t") for no, row, h in rows]
    _check_time(path, rows, ts)
    return [np.array([_float(path, no, h, row, c) for no, row, h in rows]) for c in cols]


def read_trace_csv(path):
    """``(stsq, TVSQTrace)`` from a ``t,stsq,tvsq,ci`` file."""
    stsq, tvsq, ci = _read_columns(path, ("stsq", "tvsq", "ci"))
    try:
        return stsq, TVSQTrace(tvsq, ci)
    except ContractError as exc:
        raise DatasetFormatError(str(exc), path) from exc


def write_trace_csv(path, stsq, trace: TVSQTrace):
    stsq = np.asarray(stsq, dtype=float)
    if stsq.size != len(trace):
        raise ContractError("stsq and tvsq lengths differ")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "stsq", "tvsq", "ci"])
        for t, (q, y, c) in enumerate(zip(stsq, trace.values, trace.ci), start=1):
            w.writerow([t, _fmt(q), _fmt(y), _fmt(c)])


def read_stsq_csv(path) -> np.ndarray:
    """Input series from any CSV with ``t`` and ``stsq`` columns (a trace CSV works too)."""
    (stsq,) = _read_columns(path, ("stsq",))
    return stsq


def write_prediction_csv(path, values, warmup: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "tvsq_pred", "warmup"])
        for t, y in enumerate(np.asarray(values, dtype=float), start=1):
            w.writerow([t, _fmt(y), int(t <= warmup)])


def write_xy_csv(path, columns: dict):
    """Plot-ready CSV with one column per dict entry, in insertion order."""
    names = list(columns)
    data = [np.asarray(columns[n]).reshape(-1) for n in names]
    if len({d.size for d in data}) > 1:
        raise ContractError("all columns must have the same length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([x if isinstance(x, str) else int(x) if isinstance(x, (np.integer, int)) else _fmt(x)
                        for x in row])


def read_long_stsq(path, names, length: int) -> dict:
    """Per-video input series from a long ``video,t,stsq`` file."""
    rows = _rows(path, ("video", "t", "stsq"))
    series = {n: np.full(length, np.nan) for n in names}
    for no, row, h in rows:
        v = row["video"].strip()
        if v not in series:
            raise DatasetFormatError(f"video {v!r} is not in the panel", path, no)
        t = _int(path, no, h, row, "t")
        if not 1 <= t <= length:
            raise DatasetFormatError(f"t={t} outside 1..{length}", path, no)
        series[v][t - 1] = _float(path, no, h, row, "stsq")
    for v, s in series.items():
        if np.isnan(s).any():
            raise DatasetFormatError(f"missing stsq samples for video {v!r}", path)
    return series


def read_panel_csv(scores_path, ref_path, session: str = "") -> SubjectScorePanel:
    """Assemble a dense panel from long-format score and reference files.

    Videos keep the order of first appearance; subjects and seconds must cover
    ``1..I`` and ``1..T`` with no gaps or duplicates.
    """
    rows = _rows(scores_path, ("subject", "video", "t", "score"))
    videos: dict[str, int] = {}
    entries = []
    for no, row, h in rows:
        i = _int(scores_path, no, h, row, "subject")
        t = _int(scores_path, no, h, row, "t")
        v = row["video"].strip()
        s = _float(scores_path, no, h, row, "score")
        if i < 1 or t < 1:
            raise DatasetFormatError("subject and t count from 1", scores_path, no)
        videos.setdefault(v, len(videos))
        entries.append((no, i - 1, videos[v], t - 1, s))
    n_sub = max(e[1] for e in entries) + 1
    n_t = max(e[3] for e in entries) + 1
    c = np.full((n_sub, len(videos), n_t), np.nan)
    for no, i, j, t, s in entries:
        if not np.isnan(c[i, j, t]):
            raise DatasetFormatError("duplicate (subject, video, t) entry", scores_path, no)
        c[i, j, t] = s
    if np.isnan(c).any():
        i, j, t = np.argwhere(np.isnan(c))[0]
        raise DatasetFormatError(
            f"missing score for subject {i + 1}, video {list(videos)[j]}, t={t + 1}", scores_path)

    rrows = _rows(ref_path, ("subject", "t", "score"))
    ref = np.full((n_sub, n_t), np.nan)
    for no, row, h in rrows:
        i = _int(ref_path, no, h, row, "subject") - 1
        t = _int(ref_path, no, h, row, "t") - 1
        if not (0 <= i < n_sub and 0 <= t < n_t):
            raise DatasetFormatError(f"reference entry (subject {i + 1}, t={t + 1}) outside the panel",
                                     ref_path, no)
        if not np.isnan(ref[i, t]):
            raise DatasetFormatError("duplicate (subject, t) entry", ref_path, no)
        ref[i, t] = _float(ref_path, no, h, row, "score")
    if np.isnan(ref).any():
        i, t = np.argwhere(np.isnan(ref))[0]
        raise DatasetFormatError(f"missing reference score for subject {i + 1}, t={t + 1}", ref_path)
    try:
        return SubjectScorePanel(c, ref, session=session, video_names=tuple(videos))
    except ContractError as exc:
        raise DatasetFormatError(str(exc), scores_path) from exc


def write_panel_csv(scores_path, ref_path, panel: SubjectScorePanel):
    with open(scores_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "video", "t", "score"])
        for i in range(panel.scores.shape[0]):
            for j, name in enumerate(panel.video_names):
                for t in range(panel.scores.shape[2]):
                    w.writerow([i + 1, name, t + 1, _fmt(panel.scores[i, j, t])])
    with open(ref_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "t", "score"])
        for i in range(panel.ref_scores.shape[0]):
            for t in range(panel.ref_scores.shape[1]):
                w.writerow([i + 1, t + 1, _fmt(panel.ref_scores[i, t])])


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read file: {exc.strerror}", path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(exc.msg, path, exc.lineno, exc.colno) from None


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def save_dataset(path, data: TrainingDataset, session: dict | None = None):
    """Write a manifest at ``path`` and one trace CSV per record beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, item in enumerate(data.items):
        name = item.name or f"trace{k + 1:03d}"
        fname = f"{name}.csv"
        write_trace_csv(path.parent / fname, item.stsq, item.tvsq)
        entries.append({"name": name, "path": fname, "group": item.group})
    write_json(path, {"version": MANIFEST_VERSION, "kind": "tvsq.Dataset",
                      "session": dict(session or {}), "traces": entries})


def load_dataset(path) -> TrainingDataset:
    """Read a dataset manifest, or a single trace CSV as a one-trace dataset."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        stsq, tv = read_trace_csv(path)
        return TrainingDataset((TraceRecord(stsq, tv, name=path.stem),))
    doc = read_json(path)
    if not isinstance(doc, dict) or doc.get("kind") != "tvsq.Dataset":
        raise DatasetFormatError("not a dataset manifest (kind must be 'tvsq.Dataset')", path)
    if doc.get("version") != MANIFEST_VERSION:
        raise DatasetFormatError(f"unsupported manifest version {doc.get('version')!r}", path)
    entries = doc.get("traces")
    if not isinstance(entries, list) or not entries:
        raise DatasetFormatError("manifest lists no traces", path)
    items = []
    for k, e in enumerate(entries):
        if not isinstance(e, dict) or "path" not in e:
            raise DatasetFormatError(f"trace entry {k} has no 'path'", path)
        stsq, tv = read_trace_csv(path.parent / e["path"])
        items.append(TraceRecord(stsq, tv, name=str(e.get("name", Path(e["path"]).stem)),
                                 group=str(e.get("group", ""))))
    try:
        return TrainingDataset(tuple(items))
    except ContractError as exc:
        raise DatasetFormatError(str(exc), path) from exc


def save_model(path, params: HWParams):
    write_json(path, {"version": MODEL_VERSION, "kind": "tvsq.HWParams", **params.to_dict()})


def load_model(path) -> HWParams:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise DatasetFormatError("model file must hold a JSON object", path)
    if doc.get("kind") == "tvsq.TrainReport":
        doc = doc["theta_star"]
    elif doc.get("kind", "tvsq.HWParams") != "tvsq.HWParams":
        raise DatasetFormatError(f"unexpected kind {doc.get('kind')!r} for a model file", path)
    if doc.get("version", MODEL_VERSION) != MODEL_VERSION:
        raise DatasetFormatError(f"unsupported model version {doc.get('version')!r}", path)
    try:
        return HWParams.from_dict({k: v for k, v in doc.items() if k not in ("version", "kind")})
    except ContractError as exc:
        raise DatasetFormatError(str(exc), path) from exc
