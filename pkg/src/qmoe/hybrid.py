"""Hybrid autoencoder-classifier with a variational circuit in the middle.

The dataflow is: a dense encoder compresses a feature row to one latent per
qubit, pi * tanh squashes latents into rotation angles, the circuit turns
angles into Z expectations, and a small dense head maps expectations to a
fraud probability. A mirrored decoder reconstructs the input from the same
latents, but only legitimate rows contribute reconstruction loss, so the
latent space organizes around normal traffic while fraud lands where it
may.

The two objectives combine as

    total = recon_weight * mse(legit rows) + (1 - recon_weight) * bce(all)

and everything trains jointly under one Adam loop: encoder, decoder, head
by ordinary backprop, circuit parameters by the exact parameter-shift rule
with the batch-summed upstream weights. When recon_weight is exactly 1 the
classification weights vanish identically and the circuit evaluation is
skipped, so the quantum parameters stay bit-frozen rather than drifting by
rounding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, InputError
from .metrics import average_precision
from .neural import (
    MLPSpec,
    adam_init,
    bce_loss,
    init_mlp_params,
    mlp_backward,
    mlp_forward,
    mse_loss,
    optimizer_step,
)
from .qsim import MAX_QUBITS, AnsatzSpec, batch_expectations, batch_parameter_shift

__all__ = [
    "HybridConfig",
    "HybridModel",
    "EpochStats",
    "TrainReport",
    "init_hybrid",
    "fit_hybrid",
    "evaluate_loss",
    "sign_baseline_predict",
]

_EVAL_CHUNK = 512


@dataclass(frozen=True)
class HybridConfig:
    """Architecture and training knobs for the hybrid model.

    head_all_qubits widens the head input from the single measured qubit
    to every qubit's expectation. recon_weight is the mixing coefficient
    on the reconstruction term; its complement weights classification.
    """

    n_features: int = 29
    encoder_hidden: tuple = (256, 128, 64)
    n_qubits: int = 6
    n_layers: int = 6
    head_hidden: int = 8
    head_all_qubits: bool = False
    recon_weight: float = 0.5
    batch_size: int = 32
    epochs: int = 30
    learning_rate: float = 1e-3
    patience: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ConfigurationError(f"n_features must be >= 1, got {self.n_features}")
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}"
            )
        if self.n_layers < 1:
            raise ConfigurationError(f"n_layers must be >= 1, got {self.n_layers}")
        if any(int(h) < 1 for h in self.encoder_hidden):
            raise ConfigurationError(f"encoder_hidden must be positive, got {self.encoder_hidden}")
        if self.head_hidden < 1:
            raise ConfigurationError(f"head_hidden must be >= 1, got {self.head_hidden}")
        if not 0.0 <= self.recon_weight <= 1.0:
            raise ConfigurationError(
                f"recon_weight must be in [0, 1], got {self.recon_weight}"
            )
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ConfigurationError("batch_size, epochs, and patience must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"learning_rate must be positive, got {self.learning_rate}")

    @property
    def encoder_spec(self) -> MLPSpec:
        sizes = [self.n_features, *self.encoder_hidden, self.n_qubits]
        return MLPSpec(tuple(sizes), "relu", "linear")

    @property
    def decoder_spec(self) -> MLPSpec:
        sizes = [self.n_qubits, *reversed(self.encoder_hidden), self.n_features]
        return MLPSpec(tuple(sizes), "relu", "linear")

    @property
    def head_spec(self) -> MLPSpec:
        width = self.n_qubits if self.head_all_qubits else 1
        return MLPSpec((width, self.head_hidden, 1), "relu", "sigmoid")

    @property
    def ansatz(self) -> AnsatzSpec:
        return AnsatzSpec(n_qubits=self.n_qubits, n_layers=self.n_layers)

    @property
    def measured_qubits(self) -> list:
        if self.head_all_qubits:
            return list(range(self.n_qubits))
        return [self.ansatz.measure_qubit]


@dataclass
class HybridModel:
    config: HybridConfig
    encoder: list
    decoder: list
    theta: np.ndarray
    head: list

    def predict_proba(self, x) -> np.ndarray:
        """Fraud probabilities; the decoder never runs here."""
        x = self._check(x)
        out = np.empty(x.shape[0])
        for start in range(0, x.shape[0], _EVAL_CHUNK):
            chunk = x[start : start + _EVAL_CHUNK]
            _, _, _, probs = self._classify(chunk)
            out[start : start + _EVAL_CHUNK] = probs
        return out

    def reconstruct(self, x) -> np.ndarray:
        x = self._check(x)
        cfg = self.config
        z, _ = mlp_forward(cfg.encoder_spec, self.encoder, x)
        x_hat, _ = mlp_forward(cfg.decoder_spec, self.decoder, z)
        return x_hat

    def latent_angles(self, x) -> np.ndarray:
        x = self._check(x)
        z, _ = mlp_forward(self.config.encoder_spec, self.encoder, x)
        return np.pi * np.tanh(z)

    def _classify(self, x):
        """Encoder -> angles -> expectations -> head, on a prepared batch."""
        cfg = self.config
        z, _ = mlp_forward(cfg.encoder_spec, self.encoder, x)
        angles = np.pi * np.tanh(z)
        exps = batch_expectations(cfg.ansatz, self.theta, angles, cfg.measured_qubits)
        probs, _ = mlp_forward(cfg.head_spec, self.head, exps)
        return z, angles, exps, probs[:, 0]

    def _check(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.config.n_features:
            raise InputError(
                f"expected rows with {self.config.n_features} features, got shape {arr.shape}"
            )
        return arr


def init_hybrid(config: HybridConfig, rng: Optional[np.random.Generator] = None) -> HybridModel:
    """Draw fresh parameters; circuit angles start uniform in (-pi, pi)."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    encoder = init_mlp_params(config.encoder_spec, rng)
    decoder = init_mlp_params(config.decoder_spec, rng)
    theta = rng.uniform(-np.pi, np.pi, size=config.ansatz.n_params)
    head = init_mlp_params(config.head_spec, rng)
    return HybridModel(config=config, encoder=encoder, decoder=decoder, theta=theta, head=head)


def _flat_params(model: HybridModel) -> list:
    flat = []
    for w, b in model.encoder:
        flat += [w, b]
    for w, b in model.decoder:
        flat += [w, b]
    flat.append(model.theta)
    for w, b in model.head:
        flat += [w, b]
    return flat


def _set_params(model: HybridModel, flat: list) -> None:
    it = iter(flat)
    model.encoder = [(next(it), next(it)) for _ in model.encoder]
    model.decoder = [(next(it), next(it)) for _ in model.decoder]
    model.theta = next(it)
    model.head = [(next(it), next(it)) for _ in model.head]


def _batch_gradients(model: HybridModel, x: np.ndarray, y: np.ndarray):
    """Joint loss and its gradient in _flat_params order for one batch."""
    cfg = model.config
    lam = cfg.recon_weight

    enc_out, enc_cache = mlp_forward(cfg.encoder_spec, model.encoder, x)
    z = enc_out
    tanh_z = np.tanh(z)
    angles = np.pi * tanh_z

    exps = batch_expectations(cfg.ansatz, model.theta, angles, cfg.measured_qubits)
    head_out, head_cache = mlp_forward(cfg.head_spec, model.head, exps)
    probs = head_out[:, 0]
    class_loss, class_grad = bce_loss(y, probs)

    dec_out, dec_cache = mlp_forward(cfg.decoder_spec, model.decoder, z)
    legit = y == 0
    grad_xhat = np.zeros_like(dec_out)
    if legit.any():
        recon_loss, recon_grad = mse_loss(x[legit], dec_out[legit])
        grad_xhat[legit] = lam * recon_grad
    else:
        recon_loss = 0.0
    total = lam * recon_loss + (1.0 - lam) * class_loss

    head_grads, d_exps = mlp_backward(
        cfg.head_spec, model.head, head_cache, ((1.0 - lam) * class_grad)[:, None]
    )

    # d_exps carries all classification weight; identically zero means the
    # circuit cannot influence the loss, so skip its 4 * n_params * rows
    # shifted evaluations and freeze theta exactly.
    if np.any(d_exps != 0.0):
        d_theta_all, d_angle_all = batch_parameter_shift(
            cfg.ansatz, model.theta, angles, cfg.measured_qubits
        )
        theta_grad = np.einsum("bq,bpq->p", d_exps, d_theta_all)
        d_angles = np.einsum("bq,bnq->bn", d_exps, d_angle_all)
    else:
        theta_grad = np.zeros_like(model.theta)
        d_angles = np.zeros_like(angles)

    dz = d_angles * np.pi * (1.0 - tanh_z * tanh_z)
    dec_grads, dz_recon = mlp_backward(cfg.decoder_spec, model.decoder, dec_cache, grad_xhat)
    enc_grads, _ = mlp_backward(cfg.encoder_spec, model.encoder, enc_cache, dz + dz_recon)

    flat_grads = []
    for dw, db in enc_grads:
        flat_grads += [dw, db]
    for dw, db in dec_grads:
        flat_grads += [dw, db]
    flat_grads.append(theta_grad)
    for dw, db in head_grads:
        flat_grads += [dw, db]
    return total, recon_loss, class_loss, flat_grads


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    recon_loss: float
    class_loss: float
    val_ap: Optional[float]
    seconds: float


@dataclass
class TrainReport:
    """Per-epoch training record; seconds are wall-clock and not reproducible."""

    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def fit_hybrid(config: HybridConfig, x, y, x_val=None, y_val=None):
    """Train jointly; returns (model, report).

    With a validation set, training stops once validation average
    precision has not improved for `patience` epochs and the parameters
    roll back to the best epoch's snapshot.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.n_features:
        raise InputError(f"expected (rows, {config.n_features}) features, got {x.shape}")
    if y.shape != (x.shape[0],) or not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be one 0/1 value per row")
    if x.shape[0] == 0:
        raise InputError("cannot fit on an empty dataset")
    use_val = x_val is not None and y_val is not None
    if use_val:
        x_val = np.asarray(x_val, dtype=np.float64)
        y_val = np.asarray(y_val, dtype=np.float64)
        if np.unique(y_val).size < 2:
            raise InputError("validation labels need both classes for average precision")

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    model = init_hybrid(config, rng)
    opt = adam_init(_flat_params(model), learning_rate=config.learning_rate)

    report = TrainReport()
    best_ap = -np.inf
    best_snapshot = None
    n = x.shape[0]
    for epoch in range(config.epochs):
        tick = time.perf_counter()
        order = rng.permutation(n)
        total_sum = recon_sum = class_sum = 0.0
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            total, recon, classification, grads = _batch_gradients(model, x[rows], y[rows])
            _set_params(model, optimizer_step(opt, _flat_params(model), grads))
            total_sum += total * rows.size
            recon_sum += recon * rows.size
            class_sum += classification * rows.size

        val_ap = None
        if use_val:
            val_ap = average_precision(model.predict_proba(x_val), y_val)
        report.epochs.append(
            EpochStats(
                epoch=epoch,
                train_loss=total_sum / n,
                recon_loss=recon_sum / n,
                class_loss=class_sum / n,
                val_ap=val_ap,
                seconds=time.perf_counter() - tick,
            )
        )
        if use_val:
            if val_ap > best_ap:
                best_ap = val_ap
                report.best_epoch = epoch
                best_snapshot = [a.copy() for a in _flat_params(model)]
            elif epoch - report.best_epoch >= config.patience:
                report.stopped_early = True
                break
        else:
            report.best_epoch = epoch

    if best_snapshot is not None:
        _set_params(model, best_snapshot)
    return model, report


def evaluate_loss(model: HybridModel, x, y):
    """(total, recon, class) losses on a dataset, without touching params."""
    x = model._check(x)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise InputError(f"labels {y.shape} do not match {x.shape[0]} rows")
    cfg = model.config
    z, _, _, probs = model._classify(x)
    class_loss, _ = bce_loss(y, probs)
    legit = y == 0
    if legit.any():
        x_hat, _ = mlp_forward(cfg.decoder_spec, model.decoder, z)
        recon_loss, _ = mse_loss(x[legit], x_hat[legit])
    else:
        recon_loss = 0.0
    lam = cfg.recon_weight
    return lam * recon_loss + (1.0 - lam) * class_loss, recon_loss, class_loss


def sign_baseline_predict(model: HybridModel, x) -> np.ndarray:
    """Headless hard labels from the measured expectation's sign.

    Classifies a row as fraud when <Z> on the measured qubit is >= 0. A
    useful floor: any trained head should beat it.
    """
    x = model._check(x)
    cfg = model.config
    z, _ = mlp_forward(cfg.encoder_spec, model.encoder, x)
    angles = np.pi * np.tanh(z)
    exps = batch_expectations(cfg.ansatz, model.theta, angles, [cfg.ansatz.measure_qubit])
    return (exps[:, 0] >= 0.0).astype(np.float64)
