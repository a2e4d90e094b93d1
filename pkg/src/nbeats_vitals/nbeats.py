"""N-BEATS blocks and stacks with a hand-written backward pass.

Interpretable models hold a trend stack followed by a seasonality stack;
generic models hold a single stack whose basis matrices are learned.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .tensor_core import (
    DTYPE,
    Activation,
    ContractError,
    DenseLayer,
    dense_backward,
    dense_forward,
    seeded_rng,
)


class Configuration(str, Enum):
    GENERIC = "generic"
    INTERPRETABLE = "interpretable"


class BasisKind(str, Enum):
    GENERIC = "generic"
    TREND = "trend"
    SEASONALITY = "seasonality"


class UnsupportedConfigurationError(ValueError):
    pass


def time_grid(n: int) -> np.ndarray:
    """``[0, 1, ..., n-1] / n``."""
    return np.arange(n, dtype=DTYPE) / n


def build_trend_basis(horizon: int, degree: int) -> np.ndarray:
    """Columns ``t**i`` for ``i = 0..degree`` on the normalized grid."""
    if horizon < 1 or degree < 0:
        raise ValueError("need horizon >= 1 and degree >= 0")
    if degree >= horizon:
        raise ValueError(f"degree {degree} must be below the grid length {horizon}")
    t = time_grid(horizon)
    return np.stack([t ** i for i in range(degree + 1)], axis=1)


def seasonality_harmonics(horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic indices of the cosine and sine columns.

    Cosines run over ``i = 0 .. floor(H/2 - 1)``. The ``i = 0`` sine is
    identically zero and is dropped, so sines run over ``i = 1 .. floor(H/2) - 1``.
    """
    n = int(np.floor(horizon / 2 - 1))
    return np.arange(0, n + 1), np.arange(1, n + 1)


def build_seasonality_basis(horizon: int) -> np.ndarray:
    """Fourier basis: all cosine columns first, then the non-trivial sines."""
    if horizon < 2:
        raise ValueError("seasonality basis needs horizon >= 2")
    t = time_grid(horizon)
    cos_i, sin_i = seasonality_harmonics(horizon)
    cols = [np.cos(2 * np.pi * i * t) for i in cos_i]
    cols += [np.sin(2 * np.pi * i * t) for i in sin_i]
    return np.stack(cols, axis=1)


@dataclass
class ModelConfig:
    configuration: Configuration = Configuration.INTERPRETABLE
    lookback: int = 72
    horizon: int = 36
    width: int = 128
    trunk_layers: int = 4
    trend_degree: int = 2
    trend_blocks: int = 3
    seasonality_blocks: int = 3
    generic_blocks: int = 6
    generic_dim: int = 8

    def __post_init__(self):
        self.configuration = Configuration(self.configuration)
        if not 0 <= self.trend_degree <= 4:
            raise ValueError("trend_degree must be in 0..4")
        if self.lookback < 2 or self.horizon < 2:
            raise ValueError("lookback and horizon must be at least 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["configuration"] = self.configuration.value
        return d


@dataclass
class Block:
    kind: BasisKind
    trunk: list[DenseLayer]
    theta_backcast: DenseLayer
    theta_forecast: DenseLayer
    backcast_basis: np.ndarray  # (L, kb)
    forecast_basis: np.ndarray  # (H, kf)

    @property
    def learned_basis(self) -> bool:
        return self.kind is BasisKind.GENERIC

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.trunk:
            out += layer.params()
        out += self.theta_backcast.params() + self.theta_forecast.params()
        if self.learned_basis:
            out += [self.backcast_basis, self.forecast_basis]
        return out

    def param_names(self) -> list[str]:
        names = []
        for k in range(len(self.trunk)):
            names += [f"trunk{k}.weight", f"trunk{k}.bias"]
        names += ["theta_b.weight", "theta_b.bias", "theta_f.weight", "theta_f.bias"]
        if self.learned_basis:
            names += ["basis_b", "basis_f"]
        return names


def block_forward(block: Block, x, cache: list | None = None):
    """Run one block. Returns ``(backcast, forecast)``.

    When ``cache`` is a list, the layer inputs needed by ``block_backward`` are
    appended to it.
    """
    x = np.asarray(x, dtype=DTYPE)
    if x.shape[-1] != block.backcast_basis.shape[0]:
        raise ContractError(
            f"block expects inputs of length {block.backcast_basis.shape[0]}, got {x.shape[-1]}"
        )
    h = x
    inputs = []
    for layer in block.trunk:
        inputs.append(h)
        h = dense_forward(layer, h)
    theta_b = dense_forward(block.theta_backcast, h)
    theta_f = dense_forward(block.theta_forecast, h)
    backcast = theta_b @ block.backcast_basis.T
    forecast = theta_f @ block.forecast_basis.T
    if cache is not None:
        cache.extend([inputs, h, theta_b, theta_f])
    return backcast, forecast


def block_backward(block: Block, cache, grad_backcast, grad_forecast):
    """Gradients for one block, in the order of ``block.params()``."""
    inputs, h, theta_b, theta_f = cache
    g_theta_b = grad_backcast @ block.backcast_basis
    g_theta_f = grad_forecast @ block.forecast_basis
    gh_b, gw_b, gb_b = dense_backward(block.theta_backcast, h, g_theta_b)
    gh_f, gw_f, gb_f = dense_backward(block.theta_forecast, h, g_theta_f)
    g = gh_b + gh_f
    trunk_grads = []
    for layer, x_in in zip(reversed(block.trunk), reversed(inputs)):
        g, gw, gb = dense_backward(layer, x_in, g)
        trunk_grads = [gw, gb] + trunk_grads
    grads = trunk_grads + [gw_b, gb_b, gw_f, gb_f]
    if block.learned_basis:
        if grad_backcast.ndim == 1:
            grads += [np.outer(grad_backcast, theta_b), np.outer(grad_forecast, theta_f)]
        else:
            grads += [grad_backcast.T @ theta_b, grad_forecast.T @ theta_f]
    return g, grads


@dataclass
class Stack:
    name: str
    kind: BasisKind
    blocks: list[Block]


@dataclass
class ForecastDecomposition:
    total: np.ndarray
    partials: dict[str, np.ndarray]

    def __getitem__(self, name):
        return self.partials[name]


@dataclass
class NBeatsModel:
    config: ModelConfig
    stacks: list[Stack] = field(default_factory=list)

    @property
    def lookback(self) -> int:
        return self.config.lookback

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def configuration(self) -> Configuration:
        return self.config.configuration

    def params(self) -> list[np.ndarray]:
        return [p for s in self.stacks for b in s.blocks for p in b.params()]

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for si, s in enumerate(self.stacks):
            for bi, b in enumerate(s.blocks):
                for name, p in zip(b.param_names(), b.params()):
                    out.append((f"stack{si}.block{bi}.{name}", p))
        return out

    def set_params(self, values) -> None:
        """Copy ``values`` into the parameter arrays in place."""
        params = self.params()
        if len(values) != len(params):
            raise ContractError("wrong number of parameter arrays")
        for p, v in zip(params, values):
            if p.shape != np.shape(v):
                raise ContractError(f"parameter shape {p.shape} != {np.shape(v)}")
            p[...] = v

    def forecast(self, x) -> np.ndarray:
        return model_forward(self, x).total


def _make_block(kind, cfg: ModelConfig, rng, zero=False) -> Block:
    L, H, w = cfg.lookback, cfg.horizon, cfg.width
    if kind is BasisKind.TREND:
        bb = build_trend_basis(L, cfg.trend_degree)
        bf = build_trend_basis(H, cfg.trend_degree)
    elif kind is BasisKind.SEASONALITY:
        bb = build_seasonality_basis(L)
        bf = build_seasonality_basis(H)
    else:
        k = cfg.generic_dim
        if zero:
            bb, bf = np.zeros((L, k)), np.zeros((H, k))
        else:
            # learned bases are linear maps theta -> output, Glorot-initialised like the layers
            bb = DenseLayer.glorot(k, L, Activation.IDENTITY, rng).weights
            bf = DenseLayer.glorot(k, H, Activation.IDENTITY, rng).weights

    def layer(n_in, n_out, act):
        if zero:
            return DenseLayer.zeros(n_in, n_out, act)
        return DenseLayer.glorot(n_in, n_out, act, rng)

    trunk = [layer(L if i == 0 else w, w, Activation.RELU) for i in range(cfg.trunk_layers)]
    theta_b = layer(w, bb.shape[1], Activation.IDENTITY)
    theta_f = layer(w, bf.shape[1], Activation.IDENTITY)
    return Block(kind, trunk, theta_b, theta_f, np.array(bb, dtype=DTYPE), np.array(bf, dtype=DTYPE))


def build_model(config: ModelConfig | None = None, seed: int = 0, zero: bool = False) -> NBeatsModel:
    """Create a model with Glorot-uniform weights (or all zeros) drawn from ``seed``."""
    cfg = config or ModelConfig()
    rng = seeded_rng(seed)
    if cfg.configuration is Configuration.INTERPRETABLE:
        layout = [
            ("trend", BasisKind.TREND, cfg.trend_blocks),
            ("seasonality", BasisKind.SEASONALITY, cfg.seasonality_blocks),
        ]
    else:
        layout = [("stack_0", BasisKind.GENERIC, cfg.generic_blocks)]
    stacks = [
        Stack(name, kind, [_make_block(kind, cfg, rng, zero) for _ in range(n)])
        for name, kind, n in layout
    ]
    return NBeatsModel(cfg, stacks)


def model_forward(model: NBeatsModel, x, caches: list | None = None) -> ForecastDecomposition:
    """Doubly residual pass over all stacks.

    Each block reads the running residual, which then loses that block's
    backcast. Block forecasts are summed per stack; the total is the sum of
    the stack partials in stack order.
    """
    x = np.asarray(x, dtype=DTYPE)
    if x.shape[-1] != model.lookback:
        raise ContractError(f"expected lookback length {model.lookback}, got {x.shape[-1]}")
    residual = x
    partials = {}
    for stack in model.stacks:
        partial = np.zeros(x.shape[:-1] + (model.horizon,), dtype=DTYPE)
        for block in stack.blocks:
            cache = [] if caches is not None else None
            backcast, forecast = block_forward(block, residual, cache)
            if caches is not None:
                caches.append(cache)
            residual = residual - backcast
            partial = partial + forecast
        partials[stack.name] = partial
    total = np.zeros_like(next(iter(partials.values())))
    for p in partials.values():
        total = total + p
    return ForecastDecomposition(total, partials)


def model_backward(model: NBeatsModel, caches, grad_total) -> list[np.ndarray]:
    """Gradients of a scalar loss w.r.t. ``model.params()`` given d loss / d total."""
    blocks = [b for s in model.stacks for b in s.blocks]
    grad_residual = np.zeros(np.shape(grad_total)[:-1] + (model.lookback,), dtype=DTYPE)
    per_block = []
    for block, cache in zip(reversed(blocks), reversed(caches)):
        # residual_out = residual_in - backcast, so d/d backcast = -d/d residual_out
        g_in, grads = block_backward(block, cache, -grad_residual, grad_total)
        grad_residual = grad_residual + g_in
        per_block.append(grads)
    return [g for grads in reversed(per_block) for g in grads]


def mse_loss_and_grad(model: NBeatsModel, x, y):
    """Mean squared error over batch and horizon, with its parameter gradients."""
    y = np.asarray(y, dtype=DTYPE)
    caches: list = []
    out = model_forward(model, x, caches)
    diff = out.total - y
    loss = float(np.mean(diff * diff))
    grad_total = 2.0 * diff / diff.size
    return loss, model_backward(model, caches, grad_total)
