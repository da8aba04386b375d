"""Command line front end.

Subcommands cover the whole workflow: generate data (synth), fit one
deployable pipeline (train), score a saved pipeline on labeled data
(evaluate), run the full cross-validated benchmark (bench), tabulate
routing latency from a report (latency), and refit the temperature
scalers of a saved pipeline on fresh data (calibrate).

Dataset resolution order everywhere: an explicit --data flag, then the
config file's csv_path, then the QMOE_DATASET environment variable, then
the built-in synthetic generator. Structured errors exit 1 with a
message on stderr; argparse handles usage errors with exit 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .bench import (
    LatencyModel,
    Pipeline,
    RunConfig,
    fit_pipeline,
    latency_table,
    load_dataset,
    load_model,
    pipeline_predict,
    run_cv,
    save_model,
    save_report,
)
from .calibration import fit_temperature
from .data import load_csv, save_csv, synthesize
from .errors import ConfigurationError, DataError, QmoeError
from .gbdt import GBDTParams
from .hybrid import HybridConfig
from .metrics import auprc_trapezoid, average_precision, pr_curve

ENV_DATASET = "QMOE_DATASET"


def _config_from_file(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must be a JSON object")
    return _config_from_dict(raw, path)


def _config_from_dict(raw: dict, origin: str) -> RunConfig:
    kwargs = dict(raw)
    try:
        if "hybrid" in kwargs:
            h = dict(kwargs["hybrid"])
            if "encoder_hidden" in h:
                h["encoder_hidden"] = tuple(h["encoder_hidden"])
            kwargs["hybrid"] = HybridConfig(**h)
        if "expert" in kwargs:
            kwargs["expert"] = GBDTParams(**kwargs["expert"])
        if "router" in kwargs:
            kwargs["router"] = GBDTParams(**kwargs["router"])
        if "gamma_grid" in kwargs:
            kwargs["gamma_grid"] = tuple(kwargs["gamma_grid"])
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"config {origin} has unknown fields: {exc}") from exc


def _resolve_config(args) -> RunConfig:
    config = _config_from_file(args.config) if args.config else RunConfig()
    updates = {}
    if getattr(args, "data", None):
        updates["csv_path"] = args.data
    elif config.csv_path is None and os.environ.get(ENV_DATASET):
        updates["csv_path"] = os.environ[ENV_DATASET]
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "rows", None) is not None:
        updates["synth_rows"] = args.rows
    if getattr(args, "out", None):
        updates["out_dir"] = args.out
    return replace(config, **updates) if updates else config


def _load_labeled(args) -> tuple:
    path = getattr(args, "data", None) or os.environ.get(ENV_DATASET)
    if not path:
        raise DataError(f"no dataset given: pass --data or set {ENV_DATASET}")
    return load_csv(path)


def _cmd_synth(args) -> int:
    x, y, _ = synthesize(args.rows, args.fraud_rate, seed=args.seed)
    save_csv(args.out, x, y)
    print(f"wrote {args.rows} rows ({int(y.sum())} positive) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    x, y = load_dataset(config)
    record, pipeline = fit_pipeline(x, y, config)
    save_model(pipeline, args.model)
    summary = {
        "model": args.model,
        "sizes": record.sizes,
        "tau_primary": record.tau_primary,
        "tau_secondary": record.tau_secondary,
        "holdout_baseline": record.baseline,
        "warnings": record.warnings,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    pipeline = load_model(args.model)
    x, y = _load_labeled(args)
    out = pipeline_predict(pipeline, x, args.gamma)
    tp = float(np.sum((out.labels == 1) & (y == 1)))
    fp = float(np.sum((out.labels == 1) & (y == 0)))
    fn = float(np.sum((out.labels == 0) & (y == 1)))
    result = {
        "rows": int(y.size),
        "positives": int(y.sum()),
        "gamma": args.gamma,
        "routed_fraction": out.routed_fraction,
        "ap": average_precision(out.probs, y) if np.unique(y).size > 1 else None,
        "aucpr": auprc_trapezoid(pr_curve(out.probs, y)) if np.unique(y).size > 1 else None,
        "precision": tp / (tp + fp) if tp + fp > 0 else 0.0,
        "recall": tp / (tp + fn) if tp + fn > 0 else None,
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    config = _resolve_config(args)
    report = run_cv(config)
    out_dir = config.out_dir or "bench-out"
    save_report(report, out_dir)
    agg = report.aggregates
    lines = [f"wrote report to {out_dir}"]
    lines.append(f"gbdt-baseline ap: mean {agg['baseline']['ap']['mean']:.4f} "
                 f"median {agg['baseline']['ap']['median']:.4f}")
    for arm in sorted(agg["combined"], key=float):
        s = agg["combined"][arm]
        lines.append(
            f"gamma {arm}: ap mean {s['ap']['mean']:.4f} median {s['ap']['median']:.4f} "
            f"routed {s['routed_fraction']['mean']:.4f}"
        )
    print("\n".join(lines))
    return 0


def _cmd_latency(args) -> int:
    path = args.report
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    try:
        with open(path) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    model = LatencyModel()
    rows = latency_table(report, args.points, model)
    print(json.dumps({"points": args.points, "per_task_s": model.per_task_s,
                      "table": rows}, indent=2, sort_keys=True))
    return 0


def _cmd_calibrate(args) -> int:
    pipeline = load_model(args.model)
    x, y = _load_labeled(args)
    scaled = pipeline.scaler.transform(x)
    combined = pipeline.combined
    scaler1 = fit_temperature(combined.primary.predict_proba(scaled), y)
    scaler2 = fit_temperature(
        np.asarray(combined.secondary.predict_proba(scaled), dtype=np.float64), y
    )
    updated = Pipeline(
        scaler=pipeline.scaler,
        combined=replace(combined, primary_scaler=scaler1, secondary_scaler=scaler2),
    )
    save_model(updated, args.out)
    print(json.dumps({
        "model": args.out,
        "temperature_primary": scaler1.temperature,
        "temperature_secondary": scaler2.temperature,
        "degenerate": scaler1.degenerate or scaler2.degenerate,
    }, indent=2, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmoe",
        description="Quantum-routed expert pipeline for rare-event detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic transaction CSV")
    p.add_argument("--rows", type=int, default=20000)
    p.add_argument("--fraud-rate", type=float, default=0.00172)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit one pipeline and save it")
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--data", help="training CSV (overrides config and env)")
    p.add_argument("--rows", type=int, help="synthetic row count override")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", required=True, help="output model path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a saved pipeline on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="labeled CSV to score")
    p.add_argument("--gamma", type=float, default=0.9)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="run the cross-validated benchmark")
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--data", help="dataset CSV (overrides config and env)")
    p.add_argument("--rows", type=int, help="synthetic row count override")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report directory (default bench-out)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("latency", help="latency table from a saved report")
    p.add_argument("--report", required=True, help="report.json or its directory")
    p.add_argument("--points", type=int, default=14000)
    p.set_defaults(func=_cmd_latency)

    p = sub.add_parser("calibrate", help="refit temperatures on fresh data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="labeled CSV for calibration")
    p.add_argument("--out", required=True, help="updated model path")
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QmoeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
