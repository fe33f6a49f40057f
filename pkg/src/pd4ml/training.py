"""Training protocol and evaluation metrics.

Adam with bias correction, reduce-on-plateau learning-rate schedule, early
stopping with best-weight restore, binary cross entropy / mean squared error,
and the evaluation metrics: accuracy, AUC (exact rank statistic with tie
correction), and resolution (population standard deviation of the residuals).
A full run is deterministic given its seed: initialization, shuffling, and
dropout all draw from one seeded stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import engine
from .engine import GradTape, Tensor, backward
from .errors import ContractError, NumericError, TrainingDiverged
from .graphs import Adjacency, normalize, normalize_batch
from .hub import LoadedData
from .models import Model, build_fcn, build_graphnet

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BCE_EPS = 1e-7
EVAL_BATCH = 256


@dataclass
class TrainConfig:
    batch_size: int
    max_epochs: int
    early_stop_patience: int
    plateau_patience: int = 8
    plateau_factor: float = 0.1
    learning_rate: float = 1e-3
    seed: int = 0


def fcn_preset(**overrides) -> TrainConfig:
    cfg = TrainConfig(batch_size=256, max_epochs=300, early_stop_patience=15)
    return _apply(cfg, overrides)


def graphnet_preset(**overrides) -> TrainConfig:
    cfg = TrainConfig(batch_size=32, max_epochs=400, early_stop_patience=50)
    return _apply(cfg, overrides)


def _apply(cfg: TrainConfig, overrides: dict) -> TrainConfig:
    for key, value in overrides.items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ContractError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# Optimizer and schedules


class AdamState:
    """First/second moment estimates plus the shared step count."""

    def __init__(self, params: dict):
        self.m = {name: np.zeros(t.shape) for name, t in params.items()}
        self.v = {name: np.zeros(t.shape) for name, t in params.items()}
        self.t = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """One bias-corrected Adam update; returns the new parameter tensors.
    A missing gradient counts as zero."""
    state.t += 1
    t = state.t
    new = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        m = state.m[name] = ADAM_BETA1 * state.m[name] + (1 - ADAM_BETA1) * g
        v = state.v[name] = ADAM_BETA2 * state.v[name] + (1 - ADAM_BETA2) * g * g
        m_hat = m / (1 - ADAM_BETA1**t)
        v_hat = v / (1 - ADAM_BETA2**t)
        new[name] = Tensor(p.data - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS),
                           trainable=True)
    return new


class PlateauScheduler:
    """Emit a learning-rate multiplier once the validation loss has not
    strictly improved for more than `patience` epochs; the counter then
    resets so it can fire again."""

    def __init__(self, patience: int = 8, factor: float = 0.1):
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.wait = 0

    def update(self, val_loss: float) -> Optional[float]:
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
            return None
        self.wait += 1
        if self.wait > self.patience:
            self.wait = 0
            return self.factor
        return None


class EarlyStopper:
    """Stop once the validation loss has not strictly improved for more than
    `patience` epochs; remembers which epoch was best."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.wait = 0
        self.epoch = 0

    def update(self, val_loss: float) -> bool:
        self.epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
            self.wait = 0
            return False
        self.wait += 1
        return self.wait > self.patience


# ---------------------------------------------------------------------------
# Losses (engine-level, differentiable)


def bce(p: Tensor, y: Tensor) -> Tensor:
    """Mean binary cross entropy on probabilities, clamped to
    [1e-7, 1 - 1e-7]."""
    pc = engine.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    one_minus_p = engine.add(engine.scale(pc, -1.0), 1.0)
    one_minus_y = engine.add(engine.scale(y, -1.0), 1.0)
    ll = engine.add(engine.mul(y, engine.log(pc)),
                    engine.mul(one_minus_y, engine.log(one_minus_p)))
    return engine.scale(engine.reduce_mean(ll), -1.0)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    diff = engine.sub(pred, target)
    return engine.reduce_mean(engine.mul(diff, diff))


# ---------------------------------------------------------------------------
# Metrics (plain numpy)


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    scores = np.asarray(scores).ravel()
    labels = np.asarray(labels).ravel()
    return float(((scores >= threshold) == (labels == 1.0)).mean())


def auc(scores, labels) -> float:
    """Probability that a random positive outranks a random negative; exact
    rank statistic, ties counted one half."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels == 1.0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("auc needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def resolution(preds, targets) -> float:
    """Population standard deviation of (prediction - target)."""
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.shape != targets.shape or preds.size < 2:
        raise ContractError("resolution needs >= 2 matching prediction/target pairs")
    return float(np.std(preds - targets))


# ---------------------------------------------------------------------------
# Fit loop


@dataclass
class RunMetrics:
    dataset: str
    model: str
    seed: int
    epochs_run: int
    final_lr: float
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"dataset": self.dataset, "model": self.model, "seed": self.seed,
               "epochs_run": self.epochs_run, "final_lr": self.final_lr,
               "metrics": self.metrics}
        return json.dumps(doc, sort_keys=True, indent=2)


class _AdjacencySource:
    """Serves per-batch normalized adjacency tensors for either one shared
    graph or a per-sample stack of binary matrices."""

    def __init__(self, adjacency: Union[Adjacency, np.ndarray, None]):
        self.stack = None
        self.shared = None
        if isinstance(adjacency, Adjacency):
            self.shared = Tensor(normalize(adjacency).matrix)
        elif adjacency is not None:
            self.stack = np.asarray(adjacency)

    def batch(self, idx: np.ndarray) -> Optional[Tensor]:
        if self.shared is not None:
            return self.shared
        if self.stack is not None:
            return Tensor(normalize_batch(self.stack[idx]))
        return None


def _loss_fn(task: str) -> Callable:
    return bce if task == "classification" else mse


def _eval_loss(model: Model, x: np.ndarray, y: np.ndarray,
               adj: _AdjacencySource, task: str) -> float:
    loss_fn = _loss_fn(task)
    total = 0.0
    for lo in range(0, x.shape[0], EVAL_BATCH):
        idx = np.arange(lo, min(lo + EVAL_BATCH, x.shape[0]))
        out = model.forward(Tensor(x[idx]), adjn=adj.batch(idx), mode="infer")
        total += float(loss_fn(out, Tensor(y[idx])).data) * idx.size
    return total / x.shape[0]


def eval_scores(model: Model, data: LoadedData, batch_size: int = EVAL_BATCH) -> np.ndarray:
    """Inference-mode scores, chunked with a fixed batch size so results are
    reproducible run to run."""
    x = model.prepare(data.features)
    adj = _AdjacencySource(data.adjacency)
    outs = []
    for lo in range(0, x.shape[0], batch_size):
        idx = np.arange(lo, min(lo + batch_size, x.shape[0]))
        outs.append(model.forward(Tensor(x[idx]), adjn=adj.batch(idx), mode="infer").data)
    return np.concatenate(outs, axis=0)


def evaluate_model(model: Model, data: LoadedData, task: str) -> dict:
    scores = eval_scores(model, data).ravel()
    y = data.y.ravel()
    if task == "classification":
        return {"accuracy": accuracy(scores, y), "auc": auc(scores, y)}
    return {"mse": float(np.mean((scores - y) ** 2)),
            "resolution": resolution(scores, y)}


def fit(model: Model, train: LoadedData, validation: LoadedData,
        config: TrainConfig, rng: Optional[np.random.Generator] = None,
        log_fn: Optional[Callable] = None) -> RunMetrics:
    """Train in place per the shared protocol and return the loss history.

    Per epoch: shuffle, mini-batches, one Adam step each; then the validation
    loss (inference mode) feeds the plateau schedule and early stopping.  On
    exit the best-epoch weights are restored.  NaN/Inf loss aborts with
    diagnostics.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    task = model.spec.task
    loss_fn = _loss_fn(task)
    x = model.prepare(train.features)
    y = np.asarray(train.y, dtype=np.float64).reshape(-1, 1)
    x_val = model.prepare(validation.features)
    y_val = np.asarray(validation.y, dtype=np.float64).reshape(-1, 1)
    adj = _AdjacencySource(train.adjacency)
    adj_val = _AdjacencySource(validation.adjacency)

    state = AdamState(model.named_parameters())
    scheduler = PlateauScheduler(config.plateau_patience, config.plateau_factor)
    stopper = EarlyStopper(config.early_stop_patience)
    lr = config.learning_rate
    best_state = model.state_arrays()
    best_val = np.inf
    history = RunMetrics(dataset="", model=model.spec.kind, seed=config.seed,
                         epochs_run=0, final_lr=lr)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(x.shape[0])
        epoch_loss = 0.0
        seen = 0
        for bi, lo in enumerate(range(0, order.size, config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            if idx.size < 2:
                continue  # batch norm needs >= 2 samples
            tape = GradTape()
            try:
                with tape:
                    out = model.forward(Tensor(x[idx]), adjn=adj.batch(idx),
                                        mode="train", rng=rng)
                    loss = loss_fn(out, Tensor(y[idx]))
            except NumericError as exc:
                raise TrainingDiverged(
                    f"non-finite values at epoch {epoch}, batch {bi}, lr {lr:g}: {exc}"
                ) from exc
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {bi}, lr {lr:g}"
                )
            grads_by_tensor = backward(tape, loss)
            params = model.named_parameters()
            grads = {name: grads_by_tensor.get(t) for name, t in params.items()}
            model.set_parameters(adam_step(params, grads, state, lr))
            epoch_loss += loss_val * idx.size
            seen += idx.size

        train_loss = epoch_loss / max(seen, 1)
        val_loss = _eval_loss(model, x_val, y_val, adj_val, task)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.epochs_run = epoch
        if log_fn is not None:
            log_fn(epoch, train_loss, val_loss, lr)

        if val_loss < best_val:
            best_val = val_loss
            best_state = model.state_arrays()
        factor = scheduler.update(val_loss)
        if factor is not None:
            lr *= factor
        if stopper.update(val_loss):
            break

    history.final_lr = lr
    model.load_state_arrays(best_state)
    return history


def aggregate_runs(runs: list) -> dict:
    """Mean and population standard deviation per metric over seeds."""
    if not runs:
        raise ContractError("no runs to aggregate")
    out = {}
    for key in runs[0].metrics:
        values = np.array([r.metrics[key] for r in runs], dtype=np.float64)
        out[key] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


def train_run(dataset: str, model_kind: str, train: LoadedData,
              validation: LoadedData, test: LoadedData, task: str, seed: int,
              hidden_width: int, config: TrainConfig,
              log_fn: Optional[Callable] = None):
    """One full seeded run: build, fit, evaluate on the test split."""
    rng = np.random.default_rng(seed)
    if model_kind == "fcn":
        input_dim = int(np.prod(train.features.shape[1:]))
        model = build_fcn(input_dim, task, rng=rng, hidden_width=hidden_width)
    elif model_kind == "graphnet":
        n_nodes, n_features = train.features.shape[1], train.features.shape[2]
        model = build_graphnet(n_nodes, n_features, task, rng=rng,
                               hidden_width=hidden_width)
    else:
        raise ContractError(f"unknown model kind {model_kind!r}")
    config.seed = seed
    history = fit(model, train, validation, config, rng=rng, log_fn=log_fn)
    history.dataset = dataset
    history.metrics = evaluate_model(model, test, task)
    return model, history
