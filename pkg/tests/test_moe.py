"""Routing tests: threshold placement, correction targets, gate behavior."""

import numpy as np
import pytest

from qmoe.calibration import TemperatureScaler, fit_temperature
from qmoe.errors import InputError
from qmoe.gbdt import GBDTParams, fit_gbdt
from qmoe.moe import (
    GAMMA_GRID,
    CombinedModel,
    combined_predict,
    fit_router,
    router_targets,
    youden_threshold,
)

IDENTITY = TemperatureScaler(temperature=1.0, nll=0.0, iterations=0)


def oracle_youden(scores, labels):
    best_tau, best_j = None, -np.inf
    pos = labels == 1
    for tau in np.unique(np.concatenate([scores, [0.0, 1.0]])):
        pred = scores > tau
        j = pred[pos].mean() - pred[~pos].mean()
        if j > best_j:  # strict: ties keep the earlier, smaller candidate
            best_j, best_tau = j, tau
    return best_tau


def test_youden_matches_brute_force():
    rng = np.random.default_rng(3)
    for trial in range(40):
        n = rng.integers(5, 60)
        labels = (rng.random(n) < 0.4).astype(float)
        if labels.min() == labels.max():
            continue
        # Coarse grid scores force plenty of exact ties.
        scores = rng.integers(0, 8, size=n) / 8.0
        assert youden_threshold(scores, labels) == oracle_youden(scores, labels)


def test_youden_perfect_separation():
    scores = np.array([0.1, 0.2, 0.3, 0.8, 0.9])
    labels = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
    tau = youden_threshold(scores, labels)
    assert tau == 0.3  # largest negative score; strict > admits every positive
    assert np.all((scores > tau) == (labels == 1))


def test_youden_ties_pick_smallest_candidate():
    # Constant scores make J = 0 everywhere, so the smallest candidate (0)
    # must come back regardless of input order.
    scores = np.full(6, 0.2)
    labels = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0])
    assert youden_threshold(scores, labels) == 0.0
    assert youden_threshold(scores[::-1], labels[::-1]) == 0.0


def test_youden_rejects_single_class():
    with pytest.raises(InputError):
        youden_threshold([0.1, 0.9], [1.0, 1.0])
    with pytest.raises(InputError):
        youden_threshold([], [])


def test_router_targets_hand_case():
    # Four rows covering every agreement quadrant at tau = 0.5:
    # row 0 primary right / secondary wrong, row 1 primary wrong /
    # secondary right, row 2 both right, row 3 both wrong.
    y = np.array([1.0, 1.0, 0.0, 0.0])
    p1 = np.array([0.8, 0.3, 0.2, 0.9])
    p2 = np.array([0.2, 0.7, 0.1, 0.8])
    z = router_targets(y, p1, p2, 0.5, 0.5)
    assert np.array_equal(z, [0.0, 1.0, 0.0, 0.0])


def test_router_targets_respect_expert_thresholds():
    y = np.array([1.0, 0.0])
    p1 = np.array([0.4, 0.4])
    p2 = np.array([0.6, 0.6])
    # Primary threshold 0.3 makes it right on row 0, wrong on row 1;
    # secondary threshold 0.7 is wrong on row 0, right on row 1.
    z = router_targets(y, p1, p2, 0.3, 0.7)
    assert np.array_equal(z, [0.0, 1.0])


def test_router_with_no_corrections_never_routes():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(50, 3))
    router = fit_router(x, np.zeros(50))
    assert router.degenerate
    probs = router.predict_proba(x)
    assert np.all(probs < min(GAMMA_GRID))


def _fitted_pair(seed=0):
    """Primary that only sees feature 0, on data whose positives split
    between a feature-0 signal and a feature-1 signal."""
    rng = np.random.default_rng(seed)
    n = 400
    y = (rng.random(n) < 0.3).astype(float)
    x = rng.normal(size=(n, 2)) * 0.3
    easy = y == 1
    half = np.nonzero(easy)[0][::2]
    x[easy, 0] += 2.0
    x[half, 0] -= 2.0  # these positives are invisible to feature 0
    x[half, 1] += 2.0
    primary = fit_gbdt(GBDTParams(n_estimators=30, max_depth=2), x[:, :1].repeat(2, axis=1) * [1, 0], y)
    secondary = fit_gbdt(GBDTParams(n_estimators=30, max_depth=2), x, y)
    return x, y, primary, secondary


def test_combined_with_cloned_secondary_equals_baseline():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(200, 3))
    y = (x[:, 0] + 0.5 * rng.normal(size=200) > 0.8).astype(float)
    primary = fit_gbdt(GBDTParams(n_estimators=20, max_depth=3), x, y)
    scaler = fit_temperature(primary.predict_proba(x), y)
    router = fit_router(x, (rng.random(200) < 0.3).astype(float))
    model = CombinedModel(
        primary=primary, primary_scaler=scaler,
        secondary=primary, secondary_scaler=scaler,
        router=router, tau_primary=0.4, tau_secondary=0.4,
    )
    baseline = scaler.apply(primary.predict_proba(x))
    for gamma in GAMMA_GRID:
        out = combined_predict(model, x, gamma)
        # Identical expert on both sides: routing must change nothing,
        # bit for bit, no matter how many rows get handed over.
        assert np.array_equal(out.probs, baseline)
        assert np.array_equal(out.labels, baseline > 0.4)


def test_routed_fraction_is_monotone_in_gamma():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(300, 3))
    z = (x[:, 1] > 0.5).astype(float)
    router = fit_router(x, z)
    model = CombinedModel(
        primary=fit_gbdt(GBDTParams(n_estimators=5, max_depth=2), x, z),
        primary_scaler=IDENTITY,
        secondary=fit_gbdt(GBDTParams(n_estimators=5, max_depth=2), x, z),
        secondary_scaler=IDENTITY,
        router=router, tau_primary=0.5, tau_secondary=0.5,
    )
    fractions = [combined_predict(model, x, g).routed_fraction for g in GAMMA_GRID]
    assert all(a >= b for a, b in zip(fractions, fractions[1:]))
    assert combined_predict(model, x, 1.0).routed_fraction == 0.0


def test_secondary_runs_only_on_routed_rows():
    calls = []

    class Counting:
        def __init__(self, inner):
            self.inner = inner

        def predict_proba(self, x):
            calls.append(x.shape[0])
            return self.inner.predict_proba(x)

    x, y, primary, secondary = _fitted_pair(seed=12)
    p1 = primary.predict_proba(x)
    p2 = secondary.predict_proba(x)
    z = router_targets(y, p1, p2, 0.5, 0.5)
    router = fit_router(x, z)
    model = CombinedModel(
        primary=primary, primary_scaler=IDENTITY,
        secondary=Counting(secondary), secondary_scaler=IDENTITY,
        router=router, tau_primary=0.5, tau_secondary=0.5,
    )
    out = combined_predict(model, x, 0.5)
    assert out.routed.sum() > 0
    assert calls == [int(out.routed.sum())]
    # Compare post-scaler values: t = 1 is an identity only up to the
    # logit round trip's final ulp.
    assert np.array_equal(out.probs[~out.routed], IDENTITY.apply(p1)[~out.routed])
    assert np.array_equal(out.probs[out.routed], IDENTITY.apply(p2[out.routed]))
    # Routing should catch rows the primary got wrong: accuracy improves.
    base_acc = np.mean((p1 > 0.5) == (y == 1))
    assert np.mean(out.labels == y) > base_acc

    calls.clear()
    none = combined_predict(model, x, 1.0)
    assert calls == []  # gate closed: secondary never invoked
    assert none.routed_fraction == 0.0


def test_combined_predict_validates_gamma():
    x, y, primary, secondary = _fitted_pair(seed=1)
    router = fit_router(x, np.zeros(len(y)))
    model = CombinedModel(
        primary=primary, primary_scaler=IDENTITY,
        secondary=secondary, secondary_scaler=IDENTITY,
        router=router, tau_primary=0.5, tau_secondary=0.5,
    )
    for bad in (0.0, -0.2, 1.0001):
        with pytest.raises(InputError):
            combined_predict(model, x, bad)
    out = combined_predict(model, x, 1.0)  # the boundary itself is legal
    assert out.probs.shape == (len(y),)


def test_router_targets_validation():
    with pytest.raises(InputError):
        router_targets([0.0, 1.0], [0.5], [0.5, 0.5], 0.5, 0.5)
    with pytest.raises(InputError):
        router_targets([0.0, 2.0], [0.5, 0.5], [0.5, 0.5], 0.5, 0.5)
