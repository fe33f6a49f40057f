"""The two shared baseline architectures.

FCN: 12 hidden dense layers (ReLU) on flattened input, task head.
GraphNet: 3 per-node shared dense layers (PReLU), 3 graph convolutions, global
average pooling, 3 dense layers, task head; batch normalization and dropout
from the first graph convolution onward (dropout 0.2 everywhere, 0.1 on the
last hidden layer).

Both are parameterized only by input shape and task.  ``hidden_width`` is a
test-only knob for desk-scale runs; the default of 256 is the real
architecture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import codec, engine
from .engine import Tensor
from .errors import ContractError, DimensionError, FormatError
from .layers import (BatchNorm, Dense, Dropout, GlobalAveragePool, GraphConv,
                     PReLU, SharedNodeDense)

DEFAULT_WIDTH = 256
FCN_DEPTH = 12


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    width: int
    activation: Optional[str] = None
    dropout: float = 0.0
    batch_norm: bool = False


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    task: str
    layers: tuple


class Model:
    """Common plumbing: parameter naming, state export, checkpointing."""

    spec: ModelSpec

    def __init__(self):
        self._named_layers: list = []

    def _add(self, name: str, layer) -> None:
        self._named_layers.append((name, layer))

    def named_parameters(self) -> dict:
        out = {}
        for lname, layer in self._named_layers:
            for pname, tensor in layer.params.named().items():
                out[f"{lname}.{pname}"] = tensor
        return out

    def set_parameters(self, params: dict) -> None:
        for lname, layer in self._named_layers:
            for pname in list(layer.params.named()):
                full = f"{lname}.{pname}"
                if full in params:
                    layer.params.assign(pname, params[full])

    def trainable_param_count(self) -> int:
        return sum(t.size for t in self.named_parameters().values())

    def state_arrays(self) -> dict:
        """Parameters plus batch-norm running statistics, as plain arrays."""
        out = {name: t.data.copy() for name, t in self.named_parameters().items()}
        for lname, layer in self._named_layers:
            if isinstance(layer, BatchNorm):
                out[f"{lname}.running_mean"] = layer.running_mean.copy()
                out[f"{lname}.running_var"] = layer.running_var.copy()
        return out

    def load_state_arrays(self, arrays: dict) -> None:
        params = {}
        for name, t in self.named_parameters().items():
            if name not in arrays:
                raise FormatError(f"checkpoint lacks parameter {name}")
            if arrays[name].shape != t.shape:
                raise FormatError(f"checkpoint shape mismatch for {name}")
            params[name] = Tensor(arrays[name], trainable=True)
        self.set_parameters(params)
        for lname, layer in self._named_layers:
            if isinstance(layer, BatchNorm):
                layer.running_mean = np.array(arrays[f"{lname}.running_mean"])
                layer.running_var = np.array(arrays[f"{lname}.running_var"])

    def config(self) -> dict:
        raise NotImplementedError

    def prepare(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forward(self, x: Tensor, adjn: Optional[Tensor] = None,
                mode: str = "infer", rng: Optional[np.random.Generator] = None) -> Tensor:
        raise NotImplementedError


class FcnModel(Model):
    def __init__(self, input_dim: int, task: str, hidden_width: int, rng):
        super().__init__()
        self.input_dim = input_dim
        self.task = task
        self.hidden_width = hidden_width
        widths = [input_dim] + [hidden_width] * FCN_DEPTH
        for i in range(FCN_DEPTH):
            self._add(f"hidden{i:02d}", Dense(widths[i], widths[i + 1], rng))
        self._add("head", Dense(hidden_width, 1, rng))
        self.spec = ModelSpec(
            kind="fcn",
            task=task,
            layers=tuple(
                [LayerSpec("dense", hidden_width, "relu") for _ in range(FCN_DEPTH)]
                + [LayerSpec("dense", 1, "sigmoid" if task == "classification" else "linear")]
            ),
        )

    def prepare(self, features: np.ndarray) -> np.ndarray:
        flat = np.asarray(features, dtype=np.float64).reshape(features.shape[0], -1)
        if flat.shape[1] != self.input_dim:
            raise DimensionError(f"flattened width {flat.shape[1]} != {self.input_dim}")
        return flat

    def forward(self, x, adjn=None, mode="infer", rng=None):
        h = x
        for name, layer in self._named_layers[:-1]:
            h = engine.max0(layer(h))
        h = self._named_layers[-1][1](h)
        if self.task == "classification":
            h = engine.sigmoid(h)
        return h

    def config(self) -> dict:
        return {"kind": "fcn", "task": self.task, "input_dim": self.input_dim,
                "hidden_width": self.hidden_width}


# dropout schedule after the pool: 0.2, 0.2, then 0.1 on the last hidden layer
_POST_POOL_DROPOUT = (0.2, 0.2, 0.1)


class GraphNetModel(Model):
    def __init__(self, n_nodes: int, n_features: int, task: str,
                 hidden_width: int, rng):
        super().__init__()
        self.n_nodes = n_nodes
        self.n_features = n_features
        self.task = task
        self.hidden_width = hidden_width
        w = hidden_width
        widths = [n_features, w, w, w]
        for i in range(3):
            self._add(f"node{i}", SharedNodeDense(widths[i], widths[i + 1], rng))
            self._add(f"node{i}_act", PReLU(w))
        for i in range(3):
            self._add(f"gc{i}", GraphConv(w, w, rng))
            self._add(f"gc{i}_bn", BatchNorm(w))
            self._add(f"gc{i}_act", PReLU(w))
            self._add(f"gc{i}_drop", Dropout(0.2))
        self._pool = GlobalAveragePool()
        for i in range(3):
            self._add(f"dense{i}", Dense(w, w, rng))
            self._add(f"dense{i}_bn", BatchNorm(w))
            self._add(f"dense{i}_act", PReLU(w))
            self._add(f"dense{i}_drop", Dropout(_POST_POOL_DROPOUT[i]))
        self._add("head", Dense(w, 1, rng))
        self.spec = ModelSpec(
            kind="graphnet",
            task=task,
            layers=tuple(
                [LayerSpec("shared_node_dense", w, "prelu") for _ in range(3)]
                + [LayerSpec("graph_conv", w, "prelu", 0.2, True) for _ in range(3)]
                + [LayerSpec("global_average_pool", w)]
                + [LayerSpec("dense", w, "prelu", _POST_POOL_DROPOUT[i], True)
                   for i in range(3)]
                + [LayerSpec("dense", 1,
                             "sigmoid" if task == "classification" else "linear")]
            ),
        )

    def prepare(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != self.n_nodes or x.shape[2] != self.n_features:
            raise DimensionError(
                f"expected (B, {self.n_nodes}, {self.n_features}) nodes, got {x.shape}"
            )
        return x

    def forward(self, x, adjn=None, mode="infer", rng=None):
        if adjn is None:
            raise ContractError("graphnet forward needs a normalized adjacency")
        by_name = dict(self._named_layers)
        h = x
        for i in range(3):
            h = by_name[f"node{i}_act"](by_name[f"node{i}"](h))
        for i in range(3):
            h = by_name[f"gc{i}"](h, adjn)
            h = by_name[f"gc{i}_bn"](h, mode=mode)
            h = by_name[f"gc{i}_act"](h)
            h = by_name[f"gc{i}_drop"](h, mode=mode, rng=rng)
        h = self._pool(h)
        for i in range(3):
            h = by_name[f"dense{i}"](h)
            h = by_name[f"dense{i}_bn"](h, mode=mode)
            h = by_name[f"dense{i}_act"](h)
            h = by_name[f"dense{i}_drop"](h, mode=mode, rng=rng)
        h = by_name["head"](h)
        if self.task == "classification":
            h = engine.sigmoid(h)
        return h

    def config(self) -> dict:
        return {"kind": "graphnet", "task": self.task, "n_nodes": self.n_nodes,
                "n_features": self.n_features, "hidden_width": self.hidden_width}


def _check_task(task: str) -> None:
    if task not in ("classification", "regression"):
        raise ContractError(f"task must be classification or regression, got {task!r}")


def build_fcn(input_dim: int, task: str, rng: Optional[np.random.Generator] = None,
              hidden_width: int = DEFAULT_WIDTH) -> FcnModel:
    if input_dim < 1:
        raise ContractError(f"input_dim must be >= 1, got {input_dim}")
    _check_task(task)
    return FcnModel(input_dim, task, hidden_width, rng or np.random.default_rng(0))


def build_graphnet(n_nodes: int, n_features: int, task: str,
                   rng: Optional[np.random.Generator] = None,
                   hidden_width: int = DEFAULT_WIDTH) -> GraphNetModel:
    if n_nodes < 1 or n_features < 1:
        raise ContractError("n_nodes and n_features must be >= 1")
    _check_task(task)
    return GraphNetModel(n_nodes, n_features, task, hidden_width,
                         rng or np.random.default_rng(0))


def fcn_param_count(input_dim: int, width: int = DEFAULT_WIDTH) -> int:
    """Closed form: input layer + 11 hidden-to-hidden layers + head."""
    return (input_dim * width + width) + (FCN_DEPTH - 1) * (width * width + width) + (width + 1)


def graphnet_param_count(n_features: int, width: int = DEFAULT_WIDTH) -> int:
    """Closed form, independent of the node count:

    first shared layer  F*w + w (affine) + w (prelu)
    2 shared layers     w^2 + 2w each
    3 graph convs       w^2 + 4w each (affine + prelu + batch-norm scale/shift)
    3 dense layers      w^2 + 4w each
    head                w + 1
    """
    return n_features * width + 8 * width * width + 31 * width + 1


def predict(model: Model, features: np.ndarray, adjacency=None,
            batch_size: int = 256) -> np.ndarray:
    """Deterministic inference-mode outputs, shape (B, 1).

    ``adjacency`` is a normalized (N, N) matrix shared by the batch, a
    normalized (B, N, N) stack, or None for the FCN.
    """
    x = model.prepare(features)
    shared = adjacency is not None and np.asarray(adjacency).ndim == 2
    adj_shared = Tensor(adjacency) if shared else None
    outs = []
    for lo in range(0, x.shape[0], batch_size):
        hi = min(lo + batch_size, x.shape[0])
        adjn = adj_shared
        if adjacency is not None and not shared:
            adjn = Tensor(adjacency[lo:hi])
        outs.append(model.forward(Tensor(x[lo:hi]), adjn=adjn, mode="infer").data)
    return np.concatenate(outs, axis=0)


def save_checkpoint(model: Model, path) -> None:
    """One PD4ML-BIN file: every parameter and running stat by name, plus a
    JSON config blob so the model can be rebuilt without other state."""
    tensors: dict = {
        "__config__": np.frombuffer(
            json.dumps(model.config(), sort_keys=True).encode("utf-8"), dtype=np.uint8
        ).copy()
    }
    tensors.update(model.state_arrays())
    codec.codec_write(tensors, path)


def load_checkpoint(path) -> Model:
    tensors = codec.codec_read(path)
    if "__config__" not in tensors:
        raise FormatError("checkpoint lacks __config__")
    cfg = json.loads(tensors.pop("__config__").tobytes().decode("utf-8"))
    if cfg["kind"] == "fcn":
        model = build_fcn(cfg["input_dim"], cfg["task"], hidden_width=cfg["hidden_width"])
    elif cfg["kind"] == "graphnet":
        model = build_graphnet(cfg["n_nodes"], cfg["n_features"], cfg["task"],
                               hidden_width=cfg["hidden_width"])
    else:
        raise FormatError(f"unknown model kind {cfg['kind']!r}")
    model.load_state_arrays(tensors)
    return model
