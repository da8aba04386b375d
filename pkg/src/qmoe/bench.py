"""Cross-validation benchmark, latency arithmetic, and model persistence.

One fold's protocol, in order: fit the scaler on the training rows only,
transform everything, undersample the training rows to a balanced set,
train both experts (the boosted primary and the hybrid secondary), fit
temperature scalers and Youden thresholds on the validation part of the
held-out rows, build router targets from calibrated probabilities on the
analysis part, train the router there, and score the holdout part last.
Holdout rows influence nothing upstream of scoring.

Every fold entry carries a baseline arm (calibrated primary alone), one
arm per gate value, and a sentinel arm at gamma = 1.0 where the gate
cannot open; the sentinel must match the baseline bit for bit, which the
record asserts in its own field. Reports contain no wall-clock values, so
two runs with one seed serialize identically.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .calibration import TemperatureScaler, apply_temperature, fit_temperature
from .data import (
    MinMaxScaler,
    fit_minmax,
    load_csv,
    split_eval,
    stratified_repeated_kfold,
    synthesize,
    undersample,
)
from .errors import ConfigurationError, InputError, ModelIOError
from .gbdt import GBDTModel, GBDTParams, Tree, fit_gbdt, router_params
from .hybrid import HybridConfig, HybridModel, fit_hybrid
from .metrics import auprc_trapezoid, average_precision, pr_curve
from .moe import (
    GAMMA_GRID,
    CombinedModel,
    combined_predict,
    fit_router,
    router_targets,
    youden_threshold,
)

__all__ = [
    "RunConfig",
    "LatencyModel",
    "latency_estimate",
    "latency_table",
    "FoldRecord",
    "BenchReport",
    "fit_fold",
    "fit_pipeline",
    "cross_validate",
    "run_cv",
    "report_to_dict",
    "save_report",
    "Pipeline",
    "pipeline_predict",
    "save_model",
    "load_model",
]

SENTINEL_GAMMA = 1.0  # gate never opens; the built-in no-routing arm

_MODEL_FORMAT = "qmoe-pipeline"
_REPORT_FORMAT = "qmoe-report"
_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    """Everything a benchmark run needs, including the dataset source.

    csv_path, when set, wins over the synthetic generator fields. The
    gamma grid must be strictly increasing inside (0, 1); the 1.0
    sentinel arm is always added on top.
    """

    csv_path: Optional[str] = None
    synth_rows: int = 20000
    synth_fraud_rate: float = 0.00172
    hybrid: HybridConfig = HybridConfig()
    expert: GBDTParams = GBDTParams()
    router: GBDTParams = router_params()
    gamma_grid: tuple = GAMMA_GRID
    n_splits: int = 5
    n_repeats: int = 3
    majority_ratio: float = 1.0
    seed: int = 0
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        grid = tuple(float(g) for g in self.gamma_grid)
        if not grid:
            raise ConfigurationError("gamma_grid must not be empty")
        if any(not 0.0 < g < 1.0 for g in grid):
            raise ConfigurationError(f"gamma values must lie strictly in (0, 1): {grid}")
        if any(a >= b for a, b in zip(grid, grid[1:])):
            raise ConfigurationError(f"gamma_grid must be strictly increasing: {grid}")
        object.__setattr__(self, "gamma_grid", grid)
        if self.n_splits < 2 or self.n_repeats < 1:
            raise ConfigurationError("need n_splits >= 2 and n_repeats >= 1")
        if self.majority_ratio <= 0:
            raise ConfigurationError(f"majority_ratio must be positive, got {self.majority_ratio}")


@dataclass(frozen=True)
class LatencyModel:
    """Seconds per quantum task, by stage, on the reference hardware."""

    server_time_s: float = 0.17
    compile_time_s: float = 1.92
    exec_time_s: float = 0.649

    def __post_init__(self) -> None:
        if min(self.server_time_s, self.compile_time_s, self.exec_time_s) < 0:
            raise ConfigurationError("stage times must be non-negative")

    @property
    def per_task_s(self) -> float:
        return self.server_time_s + self.compile_time_s + self.exec_time_s


def latency_estimate(n_points: int, routed_fraction: float,
                     model: LatencyModel = LatencyModel()) -> float:
    """Added seconds for routing a fraction of n_points, one task each.

    Deliberately assumes no batching or pipelining: every routed row pays
    the full per-task price. Linear in both arguments.
    """
    if n_points < 0:
        raise InputError(f"n_points must be >= 0, got {n_points}")
    if not 0.0 <= routed_fraction <= 1.0:
        raise InputError(f"routed_fraction must be in [0, 1], got {routed_fraction}")
    return n_points * routed_fraction * model.per_task_s


def latency_table(report: "BenchReport | dict", n_points: int,
                  model: LatencyModel = LatencyModel()) -> list:
    """Per-arm latency summary from a report's mean routed fractions."""
    d = report if isinstance(report, dict) else report_to_dict(report)
    rows = []
    for arm, stats in d["aggregates"]["combined"].items():
        fraction = stats["routed_fraction"]["mean"]
        seconds = latency_estimate(n_points, fraction, model)
        rows.append(
            {
                "gamma": float(arm),
                "routed_fraction": fraction,
                "seconds": seconds,
                "minutes": seconds / 60.0,
            }
        )
    rows.sort(key=lambda r: r["gamma"])
    return rows


@dataclass
class FoldRecord:
    repeat: int
    fold: int
    sizes: dict
    tau_primary: float
    tau_secondary: float
    temperature_primary: float
    temperature_secondary: float
    primary_trees: int
    hybrid_epochs: int
    baseline: dict
    combined: dict  # str(gamma) -> metric dict, sentinel included
    sentinel_equals_baseline: bool
    warnings: list = field(default_factory=list)


@dataclass
class BenchReport:
    config: dict
    folds: list
    aggregates: dict


@dataclass
class Pipeline:
    """A deployable unit: the feature scaler plus the routed expert pair."""

    scaler: MinMaxScaler
    combined: CombinedModel


def pipeline_predict(pipeline: Pipeline, x_raw, gamma: float):
    return combined_predict(pipeline.combined, pipeline.scaler.transform(x_raw), gamma)


def _fold_seeds(master_seed: int, repeat: int, fold: int):
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(repeat, fold))
    return tuple(int(v) for v in ss.generate_state(3))


def _arm_metrics(y, probs, hard, routed_fraction: float, n_points: int,
                 record: FoldRecord) -> dict:
    """AUCPR/AP/precision/recall for one arm; NaN when holdout is one-class."""
    out = {
        "routed_fraction": float(routed_fraction),
        "latency_seconds": latency_estimate(n_points, routed_fraction),
    }
    if np.unique(y).size < 2:
        note = "holdout split has one class; ranking metrics are NaN"
        if note not in record.warnings:
            record.warnings.append(note)
        out.update(aucpr=float("nan"), ap=float("nan"),
                   precision=float("nan"), recall=float("nan"))
        return out
    out["ap"] = average_precision(probs, y)
    out["aucpr"] = auprc_trapezoid(pr_curve(probs, y))
    tp = float(np.sum((hard == 1) & (y == 1)))
    fp = float(np.sum((hard == 1) & (y == 0)))
    fn = float(np.sum((hard == 0) & (y == 1)))
    out["precision"] = tp / (tp + fp) if tp + fp > 0 else 0.0
    out["recall"] = tp / (tp + fn)
    return out


def fit_fold(config: RunConfig, x, y, train_idx, heldout_idx,
             repeat: int, fold: int):
    """Run one fold end to end; returns (record, pipeline)."""
    split_seed, sample_seed, hybrid_seed = _fold_seeds(config.seed, repeat, fold)
    record = FoldRecord(
        repeat=repeat, fold=fold, sizes={}, tau_primary=0.5, tau_secondary=0.5,
        temperature_primary=1.0, temperature_secondary=1.0,
        primary_trees=0, hybrid_epochs=0, baseline={}, combined={},
        sentinel_equals_baseline=False,
    )

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parts = split_eval(y, heldout_idx, seed=split_seed)

        scaler = fit_minmax(x[train_idx])
        x_train = scaler.transform(x[train_idx])
        x_val = scaler.transform(x[parts.validation])
        x_ana = scaler.transform(x[parts.analysis])
        x_hold = scaler.transform(x[parts.holdout])
        y_train, y_val = y[train_idx], y[parts.validation]
        y_ana, y_hold = y[parts.analysis], y[parts.holdout]

        x_bal, y_bal, _ = undersample(
            x_train, y_train, majority_ratio=config.majority_ratio, seed=sample_seed
        )
        record.sizes = {
            "train": {"rows": int(train_idx.size), "positives": int(y_train.sum())},
            "balanced": {"rows": int(y_bal.size), "positives": int(y_bal.sum())},
            "validation": {"rows": int(y_val.size), "positives": int(y_val.sum())},
            "analysis": {"rows": int(y_ana.size), "positives": int(y_ana.sum())},
            "holdout": {"rows": int(y_hold.size), "positives": int(y_hold.sum())},
        }

        primary = fit_gbdt(config.expert, x_bal, y_bal, x_val, y_val)
        record.primary_trees = len(primary.trees)

        hybrid_cfg = replace(config.hybrid, seed=hybrid_seed)
        if np.unique(y_val).size < 2:
            record.warnings.append(
                "validation split has one class; hybrid trained without early stopping"
            )
            secondary, train_report = fit_hybrid(hybrid_cfg, x_bal, y_bal)
        else:
            secondary, train_report = fit_hybrid(hybrid_cfg, x_bal, y_bal, x_val, y_val)
        record.hybrid_epochs = len(train_report.epochs)

        p1_val = primary.predict_proba(x_val)
        p2_val = secondary.predict_proba(x_val)
        scaler1 = fit_temperature(p1_val, y_val)
        scaler2 = fit_temperature(p2_val, y_val)
        record.temperature_primary = scaler1.temperature
        record.temperature_secondary = scaler2.temperature
        if scaler1.degenerate or scaler2.degenerate:
            record.warnings.append("temperature fit degenerate; kept t = 1")

        if np.unique(y_val).size < 2:
            record.warnings.append(
                "validation split has one class; thresholds fall back to 0.5"
            )
            tau1 = tau2 = 0.5
        else:
            tau1 = youden_threshold(apply_temperature(scaler1, p1_val), y_val)
            tau2 = youden_threshold(apply_temperature(scaler2, p2_val), y_val)
        record.tau_primary, record.tau_secondary = tau1, tau2

        targets = router_targets(
            y_ana,
            apply_temperature(scaler1, primary.predict_proba(x_ana)),
            apply_temperature(scaler2, secondary.predict_proba(x_ana)),
            tau1,
            tau2,
        )
        router = fit_router(x_ana, targets, config.router)
        if router.degenerate:
            record.warnings.append(
                "router targets were all zero; gate stays shut at every gamma"
            )

        combined = CombinedModel(
            primary=primary, primary_scaler=scaler1,
            secondary=secondary, secondary_scaler=scaler2,
            router=router, tau_primary=tau1, tau_secondary=tau2,
        )

        n_hold = int(y_hold.size)
        base_probs = apply_temperature(scaler1, primary.predict_proba(x_hold))
        base_hard = (base_probs > tau1).astype(np.float64)
        record.baseline = _arm_metrics(y_hold, base_probs, base_hard, 0.0, n_hold, record)

        for gamma in (*config.gamma_grid, SENTINEL_GAMMA):
            out = combined_predict(combined, x_hold, gamma)
            record.combined[str(gamma)] = _arm_metrics(
                y_hold, out.probs, out.labels, out.routed_fraction, n_hold, record
            )
            if gamma == SENTINEL_GAMMA:
                record.sentinel_equals_baseline = bool(
                    np.array_equal(out.probs, base_probs)
                    and np.array_equal(out.labels, base_hard)
                )

    for w in caught:
        message = str(w.message)
        if message not in record.warnings:
            record.warnings.append(message)
    return record, Pipeline(scaler=scaler, combined=combined)


def _stats(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    valid = arr[~np.isnan(arr)]
    return {
        "mean": float(np.mean(valid)) if valid.size else float("nan"),
        "std": float(np.std(valid, ddof=1)) if valid.size > 1 else float("nan"),
        "median": float(np.median(valid)) if valid.size else float("nan"),
        "n_valid": int(valid.size),
    }


_ARM_METRICS = ("aucpr", "ap", "precision", "recall", "routed_fraction", "latency_seconds")


def _aggregate(folds: list) -> dict:
    baseline = {
        m: _stats([f.baseline[m] for f in folds]) for m in _ARM_METRICS
    }
    arms = folds[0].combined.keys()
    combined = {
        arm: {m: _stats([f.combined[arm][m] for f in folds]) for m in _ARM_METRICS}
        for arm in arms
    }
    return {"baseline": baseline, "combined": combined}


def cross_validate(x, y, config: RunConfig) -> BenchReport:
    """The full repeated stratified CV over already-loaded arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    splits = stratified_repeated_kfold(y, config.n_splits, config.n_repeats, config.seed)
    folds = []
    for i, (train_idx, heldout_idx) in enumerate(splits):
        repeat, fold = divmod(i, config.n_splits)
        record, _ = fit_fold(config, x, y, train_idx, heldout_idx, repeat, fold)
        folds.append(record)
    return BenchReport(
        config=asdict(config), folds=folds, aggregates=_aggregate(folds)
    )


def load_dataset(config: RunConfig):
    """(x, y) from the configured source: a CSV path or the generator."""
    if config.csv_path is not None:
        return load_csv(config.csv_path)
    x, y, _ = synthesize(config.synth_rows, config.synth_fraud_rate, seed=config.seed)
    return x, y


def run_cv(config: RunConfig) -> BenchReport:
    x, y = load_dataset(config)
    return cross_validate(x, y, config)


def fit_pipeline(x, y, config: RunConfig):
    """Train one deployable pipeline on the first CV split of the data."""
    splits = stratified_repeated_kfold(y, config.n_splits, 1, config.seed)
    train_idx, heldout_idx = splits[0]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return fit_fold(config, x, y, train_idx, heldout_idx, 0, 0)


def report_to_dict(report: BenchReport) -> dict:
    return {
        "format": _REPORT_FORMAT,
        "version": _VERSION,
        "config": report.config,
        "folds": [asdict(f) for f in report.folds],
        "aggregates": report.aggregates,
    }


def save_report(report: BenchReport, out_dir) -> None:
    """Write report.json plus flat folds.csv / aggregates.csv exports."""
    os.makedirs(out_dir, exist_ok=True)
    d = report_to_dict(report)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "folds.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "fold", "arm", *_ARM_METRICS])
        for f in report.folds:
            # labeled honestly: the reference expert is our own GBDT
            writer.writerow([f.repeat, f.fold, "gbdt-baseline",
                             *[repr(f.baseline[m]) for m in _ARM_METRICS]])
            for arm in sorted(f.combined, key=float):
                writer.writerow([f.repeat, f.fold, arm,
                                 *[repr(f.combined[arm][m]) for m in _ARM_METRICS]])

    with open(os.path.join(out_dir, "aggregates.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arm", "metric", "mean", "std", "median", "n_valid"])
        agg = report.aggregates
        for metric in _ARM_METRICS:
            s = agg["baseline"][metric]
            writer.writerow(["gbdt-baseline", metric, repr(s["mean"]), repr(s["std"]),
                             repr(s["median"]), s["n_valid"]])
        for arm in sorted(agg["combined"], key=float):
            for metric in _ARM_METRICS:
                s = agg["combined"][arm][metric]
                writer.writerow([arm, metric, repr(s["mean"]), repr(s["std"]),
                                 repr(s["median"]), s["n_valid"]])


# --- model persistence ----------------------------------------------------
# Arrays are stored as JSON lists; Python's float repr round-trips doubles
# exactly, so a loaded model predicts bit-identically to the saved one.


def _array(values, dtype=np.float64) -> np.ndarray:
    return np.asarray(values, dtype=dtype)


def _gbdt_to_dict(model: GBDTModel) -> dict:
    return {
        "params": asdict(model.params),
        "n_features": model.n_features,
        "base_score": model.base_score,
        "degenerate": model.degenerate,
        "best_iteration": model.best_iteration,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }


def _gbdt_from_dict(d: dict) -> GBDTModel:
    return GBDTModel(
        params=GBDTParams(**d["params"]),
        n_features=d["n_features"],
        base_score=d["base_score"],
        degenerate=d["degenerate"],
        best_iteration=d["best_iteration"],
        trees=[
            Tree(
                feature=_array(t["feature"], np.int64),
                threshold=_array(t["threshold"]),
                left=_array(t["left"], np.int64),
                right=_array(t["right"], np.int64),
                value=_array(t["value"]),
            )
            for t in d["trees"]
        ],
    )


def _layers_to_list(params) -> list:
    return [[w.tolist(), b.tolist()] for w, b in params]


def _layers_from_list(items) -> list:
    return [(_array(w), _array(b)) for w, b in items]


def _hybrid_to_dict(model: HybridModel) -> dict:
    cfg = asdict(model.config)
    cfg["encoder_hidden"] = list(cfg["encoder_hidden"])
    return {
        "config": cfg,
        "encoder": _layers_to_list(model.encoder),
        "decoder": _layers_to_list(model.decoder),
        "theta": model.theta.tolist(),
        "head": _layers_to_list(model.head),
    }


def _hybrid_from_dict(d: dict) -> HybridModel:
    cfg = dict(d["config"])
    cfg["encoder_hidden"] = tuple(cfg["encoder_hidden"])
    return HybridModel(
        config=HybridConfig(**cfg),
        encoder=_layers_from_list(d["encoder"]),
        decoder=_layers_from_list(d["decoder"]),
        theta=_array(d["theta"]),
        head=_layers_from_list(d["head"]),
    )


def _temp_to_dict(scaler: TemperatureScaler) -> dict:
    return {
        "temperature": scaler.temperature,
        "nll": scaler.nll,
        "iterations": scaler.iterations,
        "degenerate": scaler.degenerate,
    }


def _secondary_to_dict(model) -> dict:
    if isinstance(model, HybridModel):
        return {"kind": "hybrid", **_hybrid_to_dict(model)}
    if isinstance(model, GBDTModel):
        return {"kind": "gbdt", **_gbdt_to_dict(model)}
    raise ModelIOError(f"cannot persist a secondary expert of type {type(model).__name__}")


def _secondary_from_dict(d: dict):
    if d["kind"] == "hybrid":
        return _hybrid_from_dict(d)
    if d["kind"] == "gbdt":
        return _gbdt_from_dict(d)
    raise ModelIOError(f"unknown secondary expert kind {d['kind']!r}")


def save_model(pipeline: Pipeline, path) -> None:
    doc = {
        "format": _MODEL_FORMAT,
        "version": _VERSION,
        "scaler": {
            "low": pipeline.scaler.low.tolist(),
            "span": pipeline.scaler.span.tolist(),
        },
        "combined": {
            "primary": _gbdt_to_dict(pipeline.combined.primary),
            "primary_scaler": _temp_to_dict(pipeline.combined.primary_scaler),
            "secondary": _secondary_to_dict(pipeline.combined.secondary),
            "secondary_scaler": _temp_to_dict(pipeline.combined.secondary_scaler),
            "router": _gbdt_to_dict(pipeline.combined.router),
            "tau_primary": pipeline.combined.tau_primary,
            "tau_secondary": pipeline.combined.tau_secondary,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> Pipeline:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _MODEL_FORMAT:
        raise ModelIOError(f"{path} is not a pipeline file")
    if doc.get("version") != _VERSION:
        raise ModelIOError(
            f"{path} has version {doc.get('version')!r}, this build reads {_VERSION}"
        )
    try:
        c = doc["combined"]
        return Pipeline(
            scaler=MinMaxScaler(low=_array(doc["scaler"]["low"]),
                                span=_array(doc["scaler"]["span"])),
            combined=CombinedModel(
                primary=_gbdt_from_dict(c["primary"]),
                primary_scaler=TemperatureScaler(**c["primary_scaler"]),
                secondary=_secondary_from_dict(c["secondary"]),
                secondary_scaler=TemperatureScaler(**c["secondary_scaler"]),
                router=_gbdt_from_dict(c["router"]),
                tau_primary=c["tau_primary"],
                tau_secondary=c["tau_secondary"],
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"model file {path} is malformed: {exc}") from exc
