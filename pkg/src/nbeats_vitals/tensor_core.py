"""Dense layers, hand-derived gradients and Adam, all in float64 numpy.

Layers work on a single vector of shape ``(in,)`` or on a batch of shape
``(batch, in)``; the batch axis always comes first.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

DTYPE = np.float64


class ContractError(ValueError):
    """Raised when array shapes break an operation's preconditions."""


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


def seeded_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; identical seeds give identical draws on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=DTYPE)
        self.bias = np.asarray(self.bias, dtype=DTYPE)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ContractError(
                f"weights {self.weights.shape} and bias {self.bias.shape} are inconsistent"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def glorot(cls, n_in: int, n_out: int, activation, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        return cls(w, np.zeros(n_out), activation)

    @classmethod
    def zeros(cls, n_in: int, n_out: int, activation=Activation.IDENTITY):
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out), activation)

    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]


def _check_input(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim not in (1, 2) or x.shape[-1] != layer.in_dim:
        raise ContractError(f"input shape {x.shape} does not match in-dimension {layer.in_dim}")
    return x


def dense_forward(layer: DenseLayer, x) -> np.ndarray:
    x = _check_input(layer, x)
    z = x @ layer.weights.T + layer.bias
    if layer.activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def dense_backward(layer: DenseLayer, x, output_grad):
    """Return ``(input_grad, weight_grad, bias_grad)`` for one layer.

    The pre-activation is recomputed from ``x``. For a batch the weight and
    bias gradients are summed over the batch axis.
    """
    x = _check_input(layer, x)
    g = np.asarray(output_grad, dtype=DTYPE)
    if g.shape != x.shape[:-1] + (layer.out_dim,):
        raise ContractError(f"output_grad shape {g.shape} inconsistent with input {x.shape}")
    if layer.activation is Activation.RELU:
        z = x @ layer.weights.T + layer.bias
        # subgradient at exactly 0 is 0
        g = g * (z > 0.0)
    input_grad = g @ layer.weights
    if x.ndim == 1:
        weight_grad = np.outer(g, x)
        bias_grad = g.copy()
    else:
        weight_grad = g.T @ x
        bias_grad = g.sum(axis=0)
    return input_grad, weight_grad, bias_grad


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0 or eps <= 0 or not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ValueError("invalid Adam hyper-parameters")
        return cls(
            [np.zeros_like(p, dtype=DTYPE) for p in params],
            [np.zeros_like(p, dtype=DTYPE) for p in params],
            lr, beta1, beta2, eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """Bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ContractError("params, grads and optimizer state differ in length")
    for p, g, m in zip(params, grads, state.first_moment):
        if p.shape != g.shape or p.shape != m.shape:
            raise ContractError(f"shape mismatch: param {p.shape}, grad {g.shape}, state {m.shape}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
