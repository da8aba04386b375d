"""Expert routing: decide per row whether the expensive model gets a say.

The primary expert scores every row. A router, itself a small boosted
model, estimates the probability that the secondary expert corrects a
primary mistake; rows whose estimate clears a confidence gate gamma are
re-scored by the secondary. Everything downstream (probabilities and hard
labels) comes from whichever expert owned the row, including that expert's
own decision threshold.

Router training targets are observational: on rows where the primary was
wrong and the secondary was right the target is 1, everywhere else 0. If
no such row exists the router degenerates to a constant near-zero prior
and the gate never opens, which collapses the combination onto the
primary alone. gamma = 1.0 does the same by construction (probabilities
cannot exceed 1), giving a built-in no-routing reference point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calibration import TemperatureScaler, apply_temperature
from .errors import InputError
from .gbdt import GBDTModel, GBDTParams, fit_gbdt, router_params

__all__ = [
    "GAMMA_GRID",
    "youden_threshold",
    "router_targets",
    "fit_router",
    "CombinedModel",
    "RoutedPrediction",
    "combined_predict",
]

GAMMA_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)


def youden_threshold(scores, labels) -> float:
    """Threshold maximizing TPR - FPR, with positives strictly above it.

    Candidates are the observed scores plus the 0 and 1 endpoints; ties in
    the statistic resolve to the smallest candidate, so the choice is
    deterministic under reordering.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.shape != y.shape or s.size == 0:
        raise InputError(f"scores {s.shape} and labels {y.shape} must match and be non-empty")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("both classes must be present to place a threshold")

    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    pos_cum = np.cumsum(y[order])
    candidates = np.unique(np.concatenate([s, [0.0, 1.0]]))
    # Rows with score <= candidate sit left of the searchsorted cut.
    below = np.searchsorted(s_sorted, candidates, side="right")
    pos_below = np.where(below > 0, pos_cum[np.maximum(below - 1, 0)], 0.0)
    tp = n_pos - pos_below
    fp = (s.size - below) - tp
    j = tp / n_pos - fp / n_neg
    return float(candidates[int(np.argmax(j))])


def router_targets(labels, primary_probs, secondary_probs,
                   tau_primary: float, tau_secondary: float) -> np.ndarray:
    """1 where the secondary fixes a primary mistake, else 0.

    Each expert is judged at its own threshold; the target asks only
    whether handing the row over would have flipped it from wrong to
    right.
    """
    y = np.asarray(labels, dtype=np.float64)
    p1 = np.asarray(primary_probs, dtype=np.float64)
    p2 = np.asarray(secondary_probs, dtype=np.float64)
    if not (y.shape == p1.shape == p2.shape):
        raise InputError(
            f"labels {y.shape}, primary {p1.shape}, secondary {p2.shape} must align"
        )
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0 or 1")
    truth = y == 1
    primary_right = (p1 > tau_primary) == truth
    secondary_right = (p2 > tau_secondary) == truth
    return (secondary_right & ~primary_right).astype(np.float64)


def fit_router(x, targets, params: Optional[GBDTParams] = None) -> GBDTModel:
    """Train the gate on correction targets; shallow trees by default.

    All-zero targets are routine (the primary was never beaten) and yield
    the degenerate prior-only model, whose near-zero output keeps the gate
    shut at every sane gamma.
    """
    return fit_gbdt(params if params is not None else router_params(), x, targets)


@dataclass
class CombinedModel:
    """Everything needed to score rows through the routed pair."""

    primary: GBDTModel
    primary_scaler: TemperatureScaler
    secondary: object  # anything with predict_proba(x) -> (rows,)
    secondary_scaler: TemperatureScaler
    router: GBDTModel
    tau_primary: float
    tau_secondary: float


@dataclass
class RoutedPrediction:
    probs: np.ndarray
    labels: np.ndarray
    routed: np.ndarray

    @property
    def routed_fraction(self) -> float:
        return float(self.routed.mean()) if self.routed.size else 0.0


def combined_predict(model: CombinedModel, x, gamma: float) -> RoutedPrediction:
    """Score rows, handing those the router flags to the secondary expert.

    The secondary runs only on flagged rows; that sparsity is the whole
    point of the gate. Hard labels apply the owning expert's threshold.
    """
    if not 0.0 < gamma <= 1.0:
        raise InputError(f"gamma must be in (0, 1], got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    probs = apply_temperature(model.primary_scaler, model.primary.predict_proba(x))
    routed = model.router.predict_proba(x) > gamma
    if routed.any():
        handed = apply_temperature(
            model.secondary_scaler,
            np.asarray(model.secondary.predict_proba(x[routed]), dtype=np.float64),
        )
        probs = probs.copy()
        probs[routed] = handed
    cut = np.where(routed, model.tau_secondary, model.tau_primary)
    return RoutedPrediction(probs=probs, labels=(probs > cut).astype(np.float64), routed=routed)
