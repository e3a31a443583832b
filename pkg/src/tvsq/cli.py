"""Command-line front end: ``tvsq {generate,prep,train,predict,order,analyze,eval}``.

Every subcommand reads its inputs, calls one library entry point and writes
the result, so files produced here match the library output exactly.

Exit codes: 0 success, 1 invalid input, 2 numerical failure (instability or a
stalled line search under ``--strict``), 3 file or format problems.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import nonlinearity_profile, stability_report
from .data import TrainingDataset, TraceRecord
from .dataprep import aggregate_tvsq
from .errors import DatasetFormatError, StabilityError, TVSQError
from .evaluation import evaluate, leave_one_group_out
from .ident import TrainConfig, train
from .model import HWParams, simulate
from .order import select_order
from .synth import GroundTruthSpec, generate_ground_truth

log = logging.getLogger("tvsq")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class NumericalFailure(TVSQError):
    """Raised by a subcommand when a numerical problem should end the run."""


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_config(path) -> TrainConfig:
    if path is None:
        return TrainConfig()
    doc = io.read_json(path)
    if not isinstance(doc, dict):
        raise DatasetFormatError("config must be a JSON object", path)
    return TrainConfig.from_dict(doc)


def _parse_range(text: str) -> list[int]:
    """``"1:6"`` (inclusive) or ``"1,2,4"``."""
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad order range {text!r}; use LO:HI or a comma list") from None


def cmd_generate(args) -> int:
    doc = io.read_json(args.spec)
    if not isinstance(doc, dict):
        raise DatasetFormatError("spec must be a JSON object", args.spec)
    if args.seed is not None:
        doc = {**doc, "target": {**doc.get("target", {}), "seed": args.seed}}
    spec = GroundTruthSpec.from_dict(doc)
    truth = generate_ground_truth(spec, offset=args.offset)
    out = _out_dir(args.out)
    io.save_dataset(out / "dataset.json", truth.dataset, session={"generator": "synthetic", **spec.to_dict()})
    io.save_model(out / "truth.json", truth.generator)
    print(f"wrote {truth.dataset.n_traces} traces of {truth.dataset.length} s to {out}")
    return EXIT_OK


def cmd_prep(args) -> int:
    panel = io.read_panel_csv(args.scores, args.ref, session=args.session or "")
    traces, stats = aggregate_tvsq(panel)
    out = _out_dir(args.out)
    if args.stsq is not None:
        stsq = io.read_long_stsq(args.stsq, panel.video_names, panel.scores.shape[2])
        items = tuple(TraceRecord(stsq[name], tr, name=name, group=args.session or "")
                      for name, tr in zip(panel.video_names, traces))
        io.save_dataset(out / "dataset.json", TrainingDataset(items), session={"session": args.session or ""})
    else:
        io.write_xy_csv(out / "tvsq.csv", {
            "video": np.repeat(np.array(panel.video_names, dtype=object), len(traces[0])),
            "t": np.tile(np.arange(1, len(traces[0]) + 1), len(traces)),
            "tvsq": np.concatenate([tr.values for tr in traces]),
            "ci": np.concatenate([tr.ci for tr in traces]),
        })
    n_out = int(stats.outliers.sum())
    print(f"aggregated {len(traces)} videos from {panel.n_subjects} subjects; {n_out} outlier samples excluded")
    return EXIT_OK


def cmd_train(args) -> int:
    data = io.load_dataset(args.data)
    config = _load_config(args.config)
    warm = io.load_model(args.warm_start) if args.warm_start else None
    report = train(data, args.r, config, warm_start=warm)
    out = _out_dir(args.out)
    io.save_model(out / "model.json", report.theta_star)
    io.write_json(out / "report.json", report.to_dict())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"r={args.r} outage={report.final_outage:.4f} rho={report.theta_star.rho:.4f} "
          f"time={report.wall_time:.1f}s")
    if args.strict and report.warnings:
        raise NumericalFailure("training finished with warnings (see above)")
    return EXIT_OK


def cmd_predict(args) -> int:
    params = io.load_model(args.model)
    stsq = io.read_stsq_csv(args.stsq)
    pred = simulate(stsq, params, args.init)
    io.write_prediction_csv(args.out, pred.values, pred.warmup)
    return EXIT_OK


def cmd_order(args) -> int:
    data = io.load_dataset(args.data)
    scan = select_order(data, args.r_range, _load_config(args.config))
    print(f"{'r':>4} {'Q_lip':>14} {'L_des':>12}")
    for r, q, mdl in scan.table():
        print(f"{r:>4} {q:>14.6g} {mdl:>12.6g}")
    print(f"selected r = {scan.selected}")
    if args.out:
        io.write_json(args.out, scan.to_dict())
    return EXIT_OK


def cmd_analyze(args) -> int:
    params = io.load_model(args.model)
    report = stability_report(params, tol=args.tol)
    prof = nonlinearity_profile(params)
    out = _out_dir(args.out)
    io.write_json(out / "stability.json", report.to_dict())
    io.write_xy_csv(out / "impulse.csv", {"d": np.arange(report.impulse.size), "h": report.impulse})
    io.write_xy_csv(out / "input_profile.csv", {"x": prof.input_x, "y": prof.input_y})
    io.write_xy_csv(out / "output_profile.csv", {"x": prof.output_x, "y": prof.output_y})
    lo, hi = report.output_range
    print(f"rho={report.rho:.6g} tau={report.tau:.6g} s l1={report.l1_norm:.6g} "
          f"output range=[{lo:.4f}, {hi:.4f}]")
    return EXIT_OK


def cmd_eval(args) -> int:
    data = io.load_dataset(args.data)
    if args.folds_by_group:
        if args.r is None:
            raise argparse.ArgumentTypeError("--folds-by-group needs --r")
        result = leave_one_group_out(data, args.r, _load_config(args.config))
    else:
        if args.model is None:
            raise argparse.ArgumentTypeError("eval needs --model unless --folds-by-group is given")
        result = evaluate(io.load_model(args.model), data, baselines=not args.no_baselines)
    if args.out:
        io.write_json(args.out, result)
    summary = result["mean"] if args.folds_by_group else result["model"]["pooled"]
    print(" ".join(f"{k}={'null' if v is None else f'{v:.4f}'}" for k, v in summary.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvsq", description="Hammerstein-Wiener models of time-varying video quality.")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic ground-truth dataset from a JSON spec")
    g.add_argument("--spec", required=True, help="GroundTruthSpec JSON")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="override target.seed in the spec")
    g.add_argument("--offset", type=int, default=0, help="first trace index (held-out sets use a different offset)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("prep", help="aggregate a subject panel into TVSQ traces")
    s.add_argument("--scores", required=True, help="CSV with subject,video,t,score")
    s.add_argument("--ref", required=True, help="reference-video CSV with subject,t,score")
    s.add_argument("--stsq", help="CSV with video,t,stsq; when given a full dataset is written")
    s.add_argument("--session", help="session label, stored as each trace's group")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_prep)

    t = sub.add_parser("train", help="fit a model of order r")
    t.add_argument("--data", required=True, help="dataset manifest JSON or a single trace CSV")
    t.add_argument("--r", type=int, required=True, help="filter order")
    t.add_argument("--config", help="TrainConfig JSON")
    t.add_argument("--warm-start", help="model JSON to start from")
    t.add_argument("--strict", action="store_true", help="exit 2 when training reports warnings")
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="simulate a model on an input trace")
    pr.add_argument("--model", required=True)
    pr.add_argument("--stsq", required=True, help="CSV with t,stsq columns")
    pr.add_argument("--init", default="zero", choices=["zero", "hold"])
    pr.add_argument("--out", required=True, help="prediction CSV (t,tvsq_pred,warmup)")
    pr.set_defaults(func=cmd_predict)

    o = sub.add_parser("order", help="scan filter orders by description length")
    o.add_argument("--data", required=True)
    o.add_argument("--r-range", type=_parse_range, required=True, help="LO:HI or comma list")
    o.add_argument("--config", help="TrainConfig JSON")
    o.add_argument("--out", help="OrderScan JSON")
    o.set_defaults(func=cmd_order)

    a = sub.add_parser("analyze", help="stability report and nonlinearity profiles")
    a.add_argument("--model", required=True)
    a.add_argument("--tol", type=float, default=1e-9, help="impulse-response truncation tolerance")
    a.add_argument("--out", required=True, help="output directory")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("eval", help="metrics and pooling baselines on a dataset")
    e.add_argument("--model")
    e.add_argument("--data", required=True)
    e.add_argument("--no-baselines", action="store_true")
    e.add_argument("--folds-by-group", action="store_true", help="leave-one-group-out training and evaluation")
    e.add_argument("--r", type=int, help="order for --folds-by-group")
    e.add_argument("--config", help="TrainConfig JSON for --folds-by-group")
    e.add_argument("--out", help="metrics JSON")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StabilityError, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DatasetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TVSQError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
