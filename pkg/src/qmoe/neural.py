"""Minimal dense network stack with hand-written backpropagation.

Parameters are lists of (weights, bias) pairs with weights shaped
(fan_out, fan_in). Forward and backward accept a single vector or a batch
of row vectors. ReLU uses subgradient 0 at exactly 0, and probabilities
are clamped to [PROB_EPS, 1 - PROB_EPS] inside log computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError

PROB_EPS = 1e-7

_ACTIVATIONS = ("linear", "relu", "sigmoid", "scaled_tanh")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "linear":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "sigmoid":
        return sigmoid(pre)
    if name == "scaled_tanh":
        return np.pi * np.tanh(pre)
    raise ConfigurationError(f"unknown activation {name!r}")


def _activation_grad(name: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "linear":
        return np.ones_like(pre)
    if name == "relu":
        # subgradient 0 at exactly 0
        return (pre > 0).astype(np.float64)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "scaled_tanh":
        t = out / np.pi
        return np.pi * (1.0 - t * t)
    raise ConfigurationError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class MLPSpec:
    """Layer widths plus the hidden and output activations."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigurationError("an MLP needs at least input and output sizes")
        if any(s < 1 for s in sizes):
            raise ConfigurationError(f"layer sizes must be positive, got {sizes}")
        for name in (self.hidden_activation, self.output_activation):
            if name not in _ACTIVATIONS:
                raise ConfigurationError(
                    f"unknown activation {name!r}, expected one of {_ACTIVATIONS}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def init_mlp_params(spec: MLPSpec, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-uniform weights for ReLU-fed layers, Glorot-uniform for the rest.

    Biases start at zero. The rng is consumed in a fixed order, so one seed
    gives one network.
    """
    params = []
    for i in range(spec.n_layers):
        fan_in = spec.layer_sizes[i]
        fan_out = spec.layer_sizes[i + 1]
        hidden = i < spec.n_layers - 1
        act = spec.hidden_activation if hidden else spec.output_activation
        if act == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        params.append((weights, np.zeros(fan_out)))
    return params


@dataclass
class ForwardCache:
    """Intermediate values mlp_backward needs; tied to one forward call."""

    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    output: np.ndarray
    was_vector: bool


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[np.newaxis, :], True
    if arr.ndim == 2:
        return arr, False
    raise InputError(f"expected a vector or a batch of rows, got shape {arr.shape}")


def _check_params_shape(spec: MLPSpec, params) -> None:
    if len(params) != spec.n_layers:
        raise ConfigurationError(
            f"expected {spec.n_layers} parameter pairs, got {len(params)}"
        )
    for i, (w, b) in enumerate(params):
        want = (spec.layer_sizes[i + 1], spec.layer_sizes[i])
        if w.shape != want or b.shape != (want[0],):
            raise ConfigurationError(
                f"layer {i} parameter shapes {w.shape}/{b.shape} do not match spec {want}"
            )


def mlp_forward(spec: MLPSpec, params, x):
    """Run the network; returns (output, cache). Pure, inputs untouched."""
    _check_params_shape(spec, params)
    batch, was_vector = _as_batch(x)
    if batch.shape[1] != spec.layer_sizes[0]:
        raise ConfigurationError(
            f"input width {batch.shape[1]} does not match spec input {spec.layer_sizes[0]}"
        )
    inputs, preacts = [], []
    current = batch
    for i, (w, b) in enumerate(params):
        inputs.append(current)
        pre = current @ w.T + b
        preacts.append(pre)
        act = spec.hidden_activation if i < spec.n_layers - 1 else spec.output_activation
        current = _activate(act, pre)
    output = current[0] if was_vector else current
    cache = ForwardCache(inputs, preacts, current, was_vector)
    return output, cache


def mlp_backward(spec: MLPSpec, params, cache: ForwardCache, grad_output):
    """Backpropagate an upstream gradient through a cached forward pass.

    Returns (param_grads, grad_input) where param_grads mirrors the params
    list. Weight gradients sum over the batch axis.
    """
    _check_params_shape(spec, params)
    if len(cache.inputs) != spec.n_layers or cache.inputs[0].shape[1] != spec.layer_sizes[0]:
        raise ConfigurationError("forward cache does not match this spec and params")
    grad, _ = _as_batch(grad_output)
    if grad.shape != cache.preacts[-1].shape:
        raise ConfigurationError(
            f"upstream gradient shape {grad.shape} does not match the cached "
            f"output shape {cache.preacts[-1].shape}"
        )
    param_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * spec.n_layers
    current = cache.output
    for i in range(spec.n_layers - 1, -1, -1):
        act = spec.hidden_activation if i < spec.n_layers - 1 else spec.output_activation
        layer_out = current if i == spec.n_layers - 1 else _activate(act, cache.preacts[i])
        d_pre = grad * _activation_grad(act, cache.preacts[i], layer_out)
        w, _ = params[i]
        param_grads[i] = (d_pre.T @ cache.inputs[i], d_pre.sum(axis=0))
        grad = d_pre @ w
    grad_input = grad[0] if cache.was_vector else grad
    return param_grads, grad_input


def mse_loss(x, y):
    """Mean squared error over every component; grad is taken w.r.t. y."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise InputError(f"shape mismatch {x.shape} vs {y.shape}")
    if x.size == 0:
        raise InputError("mse_loss needs at least one component")
    diff = y - x
    loss = float(np.mean(diff * diff))
    grad = 2.0 * diff / x.size
    return loss, grad


def bce_loss(labels, probs):
    """Binary cross-entropy with clamped probabilities; grad w.r.t. probs.

    Where the clamp is active the computed loss is locally constant in the
    raw probability, so the gradient there is zero.
    """
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if y.shape != p.shape:
        raise InputError(f"shape mismatch {y.shape} vs {p.shape}")
    if y.size == 0:
        raise InputError("bce_loss needs at least one sample")
    clamped = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = float(-np.mean(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)))
    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    grad = np.where(inside, (clamped - y) / (clamped * (1.0 - clamped)), 0.0) / y.size
    return loss, grad


@dataclass
class AdamState:
    """Per-array first and second moments plus the shared step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params: list[np.ndarray], learning_rate: float = 1e-3) -> AdamState:
    if learning_rate <= 0:
        raise ConfigurationError(f"learning rate must be positive, got {learning_rate}")
    state = AdamState(learning_rate=learning_rate)
    state.m = [np.zeros_like(p) for p in params]
    state.v = [np.zeros_like(p) for p in params]
    return state


def optimizer_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]):
    """One Adam update over a flat list of arrays; returns the new arrays.

    Moments and the step counter mutate in place; the parameter arrays do
    not. Zero gradients from a fresh state leave parameters bit-identical.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigurationError(
            f"got {len(params)} params, {len(grads)} grads, state holds {len(state.m)}"
        )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    correct1 = 1.0 - b1 ** state.step
    correct2 = 1.0 - b2 ** state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ConfigurationError(
                f"param {i} shape {p.shape} does not match grad shape {g.shape}"
            )
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / correct1
        v_hat = state.v[i] / correct2
        out.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
    return out
