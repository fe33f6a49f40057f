"""Layer vocabulary for the two baseline networks.

Dense and per-node shared dense layers, graph convolution against a
pre-normalized adjacency, batch normalization, inverted dropout, PReLU and the
fixed activations, and global average pooling over the node axis.  Every layer
owns a :class:`LayerParams` and builds its forward pass from engine primitives
so gradients come for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import engine
from .engine import Tensor
from .errors import ContractError, DimensionError

# Batch-norm constants; chosen once and held fixed for reproducibility.
# Momentum 0.9: desk-scale trainings last tens of epochs, and a slower running
# average lags the weights far enough to collapse inference-mode outputs.
BN_MOMENTUM = 0.9
BN_EPS = 1e-3

PRELU_ALPHA_INIT = 0.25


@dataclass
class LayerParams:
    """Trainable tensors of one layer: weights, bias, and named extras
    (PReLU slope, batch-norm scale/shift)."""

    weights: Optional[Tensor] = None
    bias: Optional[Tensor] = None
    extra: dict = field(default_factory=dict)

    def named(self) -> dict:
        out = {}
        if self.weights is not None:
            out["weights"] = self.weights
        if self.bias is not None:
            out["bias"] = self.bias
        out.update(self.extra)
        return out

    def assign(self, name: str, t: Tensor) -> None:
        if name == "weights":
            self.weights = t
        elif name == "bias":
            self.bias = t
        else:
            self.extra[name] = t


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), trainable=True)


def _affine_params(rng, d_in: int, d_out: int) -> LayerParams:
    return LayerParams(
        weights=glorot_uniform(rng, d_in, d_out, (d_in, d_out)),
        bias=Tensor(np.zeros(d_out), trainable=True),
    )


class Dense:
    """x @ W + b on a (batch, features) input."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.d_in, self.d_out = d_in, d_out
        self.params = _affine_params(rng, d_in, d_out)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise DimensionError(f"dense expects (B, {self.d_in}), got {x.shape}")
        return engine.add_rowvec(engine.matmul(x, self.params.weights), self.params.bias)


class SharedNodeDense:
    """Per-node affine map with one weight set shared across all node slots."""

    def __init__(self, f_in: int, f_out: int, rng: np.random.Generator):
        self.f_in, self.f_out = f_in, f_out
        self.params = _affine_params(rng, f_in, f_out)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.f_in:
            raise DimensionError(f"shared dense expects (B, N, {self.f_in}), got {x.shape}")
        return engine.add_rowvec(engine.matmul(x, self.params.weights), self.params.bias)


class GraphConv:
    """Message passing through a normalized adjacency, then a shared affine map.

    The adjacency is supplied per call: either one (N, N) tensor shared by the
    whole batch or a (B, N, N) stack with one matrix per sample.
    """

    def __init__(self, f_in: int, f_out: int, rng: np.random.Generator):
        self.f_in, self.f_out = f_in, f_out
        self.params = _affine_params(rng, f_in, f_out)

    def __call__(self, x: Tensor, adjn: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.f_in:
            raise DimensionError(f"graph conv expects (B, N, {self.f_in}), got {x.shape}")
        n = x.shape[1]
        if adjn.ndim == 2:
            if adjn.shape != (n, n):
                raise DimensionError(f"adjacency {adjn.shape} vs {n} nodes")
        elif adjn.ndim == 3:
            if adjn.shape != (x.shape[0], n, n):
                raise DimensionError(f"adjacency {adjn.shape} vs input {x.shape}")
        else:
            raise DimensionError(f"adjacency rank {adjn.ndim} unsupported")
        mixed = engine.matmul(adjn, x)
        return engine.add_rowvec(engine.matmul(mixed, self.params.weights), self.params.bias)


class BatchNorm:
    """Normalize per feature channel; batch statistics in train mode, running
    statistics in inference mode.

    On 3D inputs the statistics pool over batch and node axes, which keeps the
    layer invariant under node permutations.  Running stats live outside the
    tape and are updated in train mode only.
    """

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.params = LayerParams(extra={
            "gamma": Tensor(np.ones(n_features), trainable=True),
            "beta": Tensor(np.zeros(n_features), trainable=True),
        })
        self.running_mean = np.zeros(n_features)
        self.running_var = np.ones(n_features)

    def _check(self, x: Tensor) -> None:
        if x.ndim not in (2, 3) or x.shape[-1] != self.n_features:
            raise DimensionError(f"batch norm expects (..., {self.n_features}), got {x.shape}")

    def __call__(self, x: Tensor, mode: str = "infer") -> Tensor:
        self._check(x)
        gamma = self.params.extra["gamma"]
        beta = self.params.extra["beta"]
        if mode == "train":
            if x.shape[0] < 2:
                raise ContractError("batch norm needs batch size >= 2 in train mode")
            mu = engine.reduce_mean(x, axis=0)
            if x.ndim == 3:
                mu = engine.reduce_mean(mu, axis=0)
            centered = engine.add_rowvec(x, engine.scale(mu, -1.0))
            var = engine.reduce_mean(engine.mul(centered, centered), axis=0)
            if x.ndim == 3:
                var = engine.reduce_mean(var, axis=0)
            self.running_mean = BN_MOMENTUM * self.running_mean + (1 - BN_MOMENTUM) * mu.data
            self.running_var = BN_MOMENTUM * self.running_var + (1 - BN_MOMENTUM) * var.data
            inv = engine.powf(engine.add(var, BN_EPS), -0.5)
            xhat = engine.mul_rowvec(centered, inv)
        elif mode == "infer":
            mean = Tensor(-self.running_mean)
            inv = Tensor(1.0 / np.sqrt(self.running_var + BN_EPS))
            xhat = engine.mul_rowvec(engine.add_rowvec(x, mean), inv)
        else:
            raise ContractError(f"unknown mode {mode!r}")
        return engine.add_rowvec(engine.mul_rowvec(xhat, gamma), beta)


class Dropout:
    """Inverted dropout: zero with probability `rate` at train time and scale
    survivors by 1/(1-rate); identity at inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.params = LayerParams()

    def __call__(self, x: Tensor, mode: str = "infer",
                 rng: Optional[np.random.Generator] = None) -> Tensor:
        if mode == "infer" or self.rate == 0.0:
            return x
        if rng is None:
            raise ContractError("train-mode dropout needs an rng")
        keep = rng.random(x.shape) >= self.rate
        mask = Tensor(keep / (1.0 - self.rate))
        return engine.mul(x, mask)


class PReLU:
    def __init__(self, n_channels: int):
        self.params = LayerParams(extra={
            "alpha": Tensor(np.full(n_channels, PRELU_ALPHA_INIT), trainable=True),
        })

    def __call__(self, x: Tensor) -> Tensor:
        return engine.prelu(x, self.params.extra["alpha"])


class ReLU:
    params = LayerParams()

    def __call__(self, x: Tensor) -> Tensor:
        return engine.max0(x)


class Sigmoid:
    params = LayerParams()

    def __call__(self, x: Tensor) -> Tensor:
        return engine.sigmoid(x)


class GlobalAveragePool:
    """Mean over the node axis: (B, N, F) -> (B, F). Zero-padded node slots
    are not masked; the mean runs over all N slots."""

    params = LayerParams()

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise DimensionError(f"pooling expects (B, N, F), got {x.shape}")
        if x.shape[1] == 0:
            raise ContractError("pooling over zero nodes")
        return engine.reduce_mean(x, axis=1)
