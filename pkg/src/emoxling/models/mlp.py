"""Feed-forward multi-label network: rectifier hidden layers, logistic outputs, Adam updates."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..corpus import N_LABELS, LabelVector, PredictionMatrix
from ..errors import DimensionMismatch, EmptyTrainingSet, NonFiniteLoss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 512
    hidden_dims: tuple[int, ...] = (256, 128)
    output_dim: int = N_LABELS
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    positive_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.output_dim != N_LABELS:
            raise ValueError(f"output_dim is fixed at {N_LABELS}")
        if min((self.input_dim, self.batch_size, self.max_epochs) + self.hidden_dims) < 1:
            raise ValueError("all dimensions, batch size and epoch count must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + self.hidden_dims + (self.output_dim,)


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: MlpConfig = field(default_factory=MlpConfig)
    history: dict[str, list[float]] = field(default_factory=lambda: {"train_loss": [], "val_loss": []})
    best_epoch: int = 0

    def __post_init__(self):
        dims = self.config.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("layer count does not match config")
        for W, b, d_in, d_out in zip(self.weights, self.biases, dims[:-1], dims[1:]):
            if W.shape != (d_in, d_out) or b.shape != (d_out,):
                raise ValueError(f"layer shape {W.shape}/{b.shape} does not chain as {d_in}->{d_out}")

    @property
    def params(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def to_arrays(self) -> tuple[dict, dict[str, np.ndarray]]:
        arrays = {f"W{i}": W for i, W in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        meta = {"config": asdict(self.config), "history": self.history, "best_epoch": self.best_epoch}
        return meta, arrays

    @classmethod
    def from_arrays(cls, meta: dict, arrays: dict[str, np.ndarray]) -> "MlpModel":
        config = MlpConfig(**meta["config"])
        n = len(config.layer_dims) - 1
        return cls(
            [arrays[f"W{i}"] for i in range(n)],
            [arrays[f"b{i}"] for i in range(n)],
            config,
            meta.get("history", {"train_loss": [], "val_loss": []}),
            meta.get("best_epoch", 0),
        )


def init_mlp(config: MlpConfig, rng: np.random.Generator | None = None) -> MlpModel:
    rng = rng or np.random.default_rng(config.seed)
    dims = config.layer_dims
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        # He-uniform for rectifier layers
        limit = np.sqrt(6.0 / d_in)
        weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpModel(weights, biases, config)


def forward(model: MlpModel, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Returns output logits and the activations feeding each layer."""
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = z if i == last else np.maximum(z, 0.0)
        if i != last:
            acts.append(h)
    return h, acts


def _bce(logits: np.ndarray, Y: np.ndarray, positive_weight: float = 1.0) -> np.ndarray:
    # stable per-element cross-entropy on logits
    softplus_pos = np.logaddexp(0.0, -logits)  # -log sigmoid(z)
    softplus_neg = np.logaddexp(0.0, logits)  # -log(1 - sigmoid(z))
    return positive_weight * Y * softplus_pos + (1.0 - Y) * softplus_neg


def loss_and_grads(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean over the batch of the summed per-label cross-entropy, with gradients for every parameter.

    Gradients come back ordered like `model.params` (all weights, then all biases).
    """
    pw = model.config.positive_weight
    logits, acts = forward(model, X)
    n = X.shape[0]
    loss = float(_bce(logits, Y, pw).sum() / n)
    p = expit(logits)
    delta = ((pw * Y + 1.0 - Y) * p - pw * Y) / n
    gW = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return loss, gW + gb


def mean_loss(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> float:
    logits, _ = forward(model, X)
    return float(_bce(logits, Y, model.config.positive_weight).sum() / X.shape[0])


class EarlyStopping:
    """Stops once the monitored loss has not improved for `patience` consecutive epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.best_state = None
        self.wait = 0

    def update(self, epoch: int, loss: float, state=None) -> bool:
        if loss < self.best:
            self.best, self.best_epoch, self.wait = loss, epoch, 0
            self.best_state = copy.deepcopy(state)
            return False
        self.wait += 1
        return self.wait >= self.patience


class _Adam:
    def __init__(self, params: list[np.ndarray], config: MlpConfig):
        self.cfg = config
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        lr = c.learning_rate * np.sqrt(1 - c.beta2 ** self.t) / (1 - c.beta1 ** self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= lr * m / (np.sqrt(v) + c.epsilon)


def _label_array(Y) -> np.ndarray:
    if len(Y) and isinstance(Y[0], LabelVector):
        return np.array([y.bits for y in Y], dtype=np.float64)
    return np.asarray(Y, dtype=np.float64)


def _check_inputs(X: np.ndarray, Y: np.ndarray, config: MlpConfig, what: str):
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise DimensionMismatch(f"{what}: inputs of shape {X.shape}, expected (n, {config.input_dim})")
    if Y.shape != (X.shape[0], N_LABELS):
        raise DimensionMismatch(f"{what}: labels of shape {Y.shape}, expected ({X.shape[0]}, {N_LABELS})")


def validation_loss(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> float:
    return mean_loss(model, X, Y)


def train_mlp(X, Y: Sequence[LabelVector] | np.ndarray, val: tuple, config: MlpConfig = MlpConfig()) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    Y = _label_array(Y)
    Xv = np.asarray(val[0], dtype=np.float64)
    Yv = _label_array(val[1])
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training examples")
    if Xv.shape[0] == 0:
        raise EmptyTrainingSet("validation set is empty")
    _check_inputs(X, Y, config, "train")
    _check_inputs(Xv, Yv, config, "validation")

    rng = np.random.default_rng(config.seed)
    model = init_mlp(config, rng)
    opt = _Adam(model.params, config)
    stopper = EarlyStopping(config.patience)
    n = X.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        batch_losses, batch_sizes = [], []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_grads(model, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training loss became {loss} in epoch {epoch}")
            opt.step(model.params, grads)
            batch_losses.append(loss)
            batch_sizes.append(idx.size)
        train_loss = float(np.average(batch_losses, weights=batch_sizes))
        val_loss = validation_loss(model, Xv, Yv)
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(f"validation loss became {val_loss} in epoch {epoch}")
        model.history["train_loss"].append(train_loss)
        model.history["val_loss"].append(val_loss)
        log.debug("epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
        if stopper.update(epoch, val_loss, (model.weights, model.biases)):
            break
    best_w, best_b = stopper.best_state
    return MlpModel(best_w, best_b, config, model.history, stopper.best_epoch)


def predict_mlp(model: MlpModel, X, ids: Sequence[str] | None = None) -> PredictionMatrix:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise DimensionMismatch(f"inputs of shape {X.shape}, model expects {model.config.input_dim} features")
    logits, _ = forward(model, X)
    if ids is None:
        ids = [str(i) for i in range(X.shape[0])]
    return PredictionMatrix(tuple(ids), expit(logits), 0.5)
