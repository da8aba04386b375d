"""Precision-recall metrics for heavily imbalanced binary scoring.

All curve computations sweep thresholds over the distinct score values in
descending order, grouping tied scores into a single operating point. A
prediction is positive when its score is strictly above the threshold of
interest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "PRCurve",
    "ThresholdMetrics",
    "pr_curve",
    "auprc_trapezoid",
    "average_precision",
    "precision_recall_at",
    "curve_to_csv",
]


@dataclass(frozen=True)
class PRCurve:
    """One (recall, precision) point per distinct score, ascending recall."""

    recall: np.ndarray
    precision: np.ndarray
    thresholds: np.ndarray


@dataclass(frozen=True)
class ThresholdMetrics:
    precision: float
    recall: float
    tp: int
    fp: int
    tn: int
    fn: int
    # 0/0 conventions, flagged so callers can surface degenerate folds
    no_predicted_positives: bool
    no_actual_positives: bool


def _validated(scores, labels, need_both_classes=True):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.shape != s.shape:
        raise InputError(f"scores {s.shape} and labels {y.shape} must be equal-length vectors")
    if s.size == 0:
        raise InputError("need at least one sample")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    y = y.astype(np.int64)
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0 or 1")
    if need_both_classes and (y.min() == y.max()):
        raise InputError("both classes must be present")
    return s, y


def pr_curve(scores, labels) -> PRCurve:
    """Sweep distinct scores from high to low, accumulating TP and FP."""
    s, y = _validated(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each tie block
    block_end = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(y_sorted)[block_end].astype(np.float64)
    fp = np.cumsum(1 - y_sorted)[block_end].astype(np.float64)
    n_pos = float(y.sum())
    return PRCurve(
        recall=tp / n_pos,
        precision=tp / (tp + fp),
        thresholds=s_sorted[block_end],
    )


def average_precision(scores, labels) -> float:
    """Step-wise sum over the sweep: sum (R_n - R_{n-1}) * P_n."""
    curve = pr_curve(scores, labels)
    dr = np.diff(np.concatenate(([0.0], curve.recall)))
    return float(np.sum(dr * curve.precision))


def auprc_trapezoid(curve: PRCurve) -> float:
    """Trapezoidal area under the best precision achieved at each recall.

    Along the sweep, points sharing a recall value differ only in added
    false positives, so the first point of each recall level carries the
    highest precision; the integral runs over that envelope. An anchor at
    (recall 0, precision 1) is prepended unless recall 0 is already on the
    curve.
    """
    r = np.asarray(curve.recall, dtype=np.float64)
    p = np.asarray(curve.precision, dtype=np.float64)
    if r.size == 0:
        raise InputError("cannot integrate an empty curve")
    first = np.concatenate(([True], r[1:] != r[:-1]))
    r_env = r[first]
    p_env = p[first]
    if r_env[0] > 0.0:
        r_env = np.concatenate(([0.0], r_env))
        p_env = np.concatenate(([1.0], p_env))
    widths = r_env[1:] - r_env[:-1]
    return float(np.sum(widths * 0.5 * (p_env[1:] + p_env[:-1])))


def precision_recall_at(scores, labels, threshold: float) -> ThresholdMetrics:
    """Confusion counts for the rule: positive iff score > threshold.

    Precision with no predicted positives is reported as 0.0 and flagged;
    recall with no actual positives is reported as NaN and flagged.
    """
    s, y = _validated(scores, labels, need_both_classes=False)
    pred = s > threshold
    actual = y == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    no_pred = (tp + fp) == 0
    no_actual = (tp + fn) == 0
    precision = 0.0 if no_pred else tp / (tp + fp)
    recall = float("nan") if no_actual else tp / (tp + fn)
    return ThresholdMetrics(precision, recall, tp, fp, tn, fn, no_pred, no_actual)


def curve_to_csv(curve: PRCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            writer.writerow([repr(float(t)), repr(float(p)), repr(float(r))])
