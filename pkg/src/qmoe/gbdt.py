"""Gradient boosted decision trees with second-order logistic-loss splits.

Split search is exact greedy over sorted feature columns. For a candidate
partition with gradient/hessian sums (G_L, H_L) and (G_R, H_R) the gain is

    0.5 * (G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda)
           - (G_L + G_R)^2 / (H_L + H_R + lambda)) - min_split_gain

and a leaf takes the Newton weight -G / (H + lambda). Thresholds sit on
data values with the rule x <= threshold goes left; a split is accepted
when its net gain is >= 0, and ties break toward the lower feature index,
then the lower threshold. Training is therefore fully deterministic for a
fixed dataset and parameter set; no row or column subsampling happens
anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InputError
from .neural import PROB_EPS, sigmoid

__all__ = ["GBDTParams", "Tree", "GBDTModel", "router_params", "fit_gbdt"]

_PRIOR_EPS = 1e-6


@dataclass(frozen=True)
class GBDTParams:
    """Boosting hyperparameters.

    n_estimators: boosting rounds grown (early stopping may keep fewer).
    max_depth: depth cap per tree; 0 would be a bare root, so >= 1.
    learning_rate: shrinkage applied to every leaf contribution.
    reg_lambda: L2 penalty on leaf weights, must stay positive.
    min_split_gain: subtracted from every candidate gain before acceptance.
    min_child_weight: smallest hessian mass allowed on either side.
    early_stopping_rounds: patience on validation logloss; 0 disables.
    """

    n_estimators: int = 200
    max_depth: int = 4
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    min_child_weight: float = 1.0
    early_stopping_rounds: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ConfigurationError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_depth < 1:
            raise ConfigurationError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.reg_lambda <= 0:
            raise ConfigurationError(f"reg_lambda must be positive, got {self.reg_lambda}")
        if self.min_split_gain < 0 or self.min_child_weight < 0:
            raise ConfigurationError("min_split_gain and min_child_weight must be >= 0")
        if self.early_stopping_rounds < 0:
            raise ConfigurationError("early_stopping_rounds must be >= 0")


def router_params(**overrides) -> GBDTParams:
    """Shallow defaults for routing duty: depth 3, 100 rounds."""
    base = GBDTParams(n_estimators=100, max_depth=3)
    return replace(base, **overrides) if overrides else base


@dataclass
class Tree:
    """One regression tree as parallel node arrays; feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return self.value[node]
            rows = np.nonzero(active)[0]
            at = node[rows]
            go_left = x[rows, feat[rows]] <= self.threshold[at]
            node[rows] = np.where(go_left, self.left[at], self.right[at])


@dataclass
class GBDTModel:
    params: GBDTParams
    n_features: int
    base_score: float  # log-odds of the training prior
    trees: list[Tree] = field(default_factory=list)
    degenerate: bool = False  # single-class training labels, no trees grown
    best_iteration: Optional[int] = None

    def predict_margin(self, x) -> np.ndarray:
        x = self._check(x)
        margin = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            margin += self.params.learning_rate * tree.predict(x)
        return margin

    def predict_proba(self, x) -> np.ndarray:
        return sigmoid(self.predict_margin(x))

    def _check(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.n_features:
            raise InputError(
                f"expected rows with {self.n_features} features, got shape {arr.shape}"
            )
        return arr


class _TreeBuilder:
    """Grows one tree on fixed gradients; collects nodes into flat arrays."""

    def __init__(self, x, grad, hess, params):
        self.x = x
        self.grad = grad
        self.hess = hess
        self.params = params
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def build(self, rows: np.ndarray, depth: int) -> int:
        p = self.params
        g_sum = float(self.grad[rows].sum())
        h_sum = float(self.hess[rows].sum())
        best = None
        if depth < p.max_depth and rows.size >= 2:
            best = self._best_split(rows, g_sum, h_sum)
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        if best is None:
            self.value[node] = -g_sum / (h_sum + p.reg_lambda)
            return node
        feat, thr, left_rows, right_rows = best
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self.build(left_rows, depth + 1)
        self.right[node] = self.build(right_rows, depth + 1)
        return node

    def _best_split(self, rows, g_sum, h_sum):
        p = self.params
        lam = p.reg_lambda
        parent = g_sum * g_sum / (h_sum + lam)
        g_node = self.grad[rows]
        h_node = self.hess[rows]
        best_gain = -np.inf
        best = None
        for feat in range(self.x.shape[1]):
            col = self.x[rows, feat]
            order = np.argsort(col, kind="stable")
            xs = col[order]
            g_left = np.cumsum(g_node[order])[:-1]
            h_left = np.cumsum(h_node[order])[:-1]
            ok = xs[:-1] != xs[1:]
            ok &= (h_left >= p.min_child_weight) & (h_sum - h_left >= p.min_child_weight)
            if not ok.any():
                continue
            g_right = g_sum - g_left
            h_right = h_sum - h_left
            gain = (
                0.5
                * (
                    g_left * g_left / (h_left + lam)
                    + g_right * g_right / (h_right + lam)
                    - parent
                )
                - p.min_split_gain
            )
            gain[~ok] = -np.inf
            i = int(np.argmax(gain))  # first max: the lowest threshold wins ties
            if gain[i] >= 0.0 and gain[i] > best_gain:
                best_gain = float(gain[i])
                best = (
                    feat,
                    float(xs[i]),
                    np.sort(rows[order[: i + 1]]),
                    np.sort(rows[order[i + 1 :]]),
                )
        return best


def _logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def fit_gbdt(params: GBDTParams, x, y, x_val=None, y_val=None) -> GBDTModel:
    """Boost trees on (x, y); optional validation set drives early stopping.

    Single-class labels produce a flagged prior-only model with no trees.
    When early stopping triggers, the tree list is truncated to the best
    validation round, so persisted and in-memory predictions agree.
    """
    x = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y_arr.shape[0]:
        raise InputError(f"features {x.shape} and labels {y_arr.shape} do not align")
    if x.shape[0] == 0:
        raise InputError("cannot fit on an empty dataset")
    if not np.all(np.isfinite(x)):
        raise InputError("features must be finite")
    y_arr = y_arr.astype(np.float64)
    if not np.all((y_arr == 0) | (y_arr == 1)):
        raise InputError("labels must be 0 or 1")

    prior = float(np.clip(y_arr.mean(), _PRIOR_EPS, 1.0 - _PRIOR_EPS))
    base = float(np.log(prior) - np.log1p(-prior))
    model = GBDTModel(params=params, n_features=x.shape[1], base_score=base)

    if y_arr.min() == y_arr.max():
        model.degenerate = True
        return model

    use_val = x_val is not None and y_val is not None and params.early_stopping_rounds > 0
    if use_val:
        x_val = np.asarray(x_val, dtype=np.float64)
        y_val_arr = np.asarray(y_val, dtype=np.float64)
        if x_val.ndim != 2 or x_val.shape[1] != x.shape[1]:
            raise InputError(f"validation features {x_val.shape} do not match {x.shape}")
        val_margin = np.full(x_val.shape[0], base)

    margin = np.full(x.shape[0], base)
    all_rows = np.arange(x.shape[0])
    best_loss = np.inf
    best_round = -1
    for round_index in range(params.n_estimators):
        p = sigmoid(margin)
        grad = p - y_arr
        hess = p * (1.0 - p)
        builder = _TreeBuilder(x, grad, hess, params)
        builder.build(all_rows, 0)
        tree = Tree(
            feature=np.asarray(builder.feature, dtype=np.int64),
            threshold=np.asarray(builder.threshold, dtype=np.float64),
            left=np.asarray(builder.left, dtype=np.int64),
            right=np.asarray(builder.right, dtype=np.int64),
            value=np.asarray(builder.value, dtype=np.float64),
        )
        model.trees.append(tree)
        margin += params.learning_rate * tree.predict(x)
        if use_val:
            val_margin += params.learning_rate * tree.predict(x_val)
            loss = _logloss(y_val_arr, sigmoid(val_margin))
            if loss < best_loss:
                best_loss = loss
                best_round = round_index
            elif round_index - best_round >= params.early_stopping_rounds:
                break
    if use_val and best_round >= 0:
        model.trees = model.trees[: best_round + 1]
        model.best_iteration = best_round
    return model
