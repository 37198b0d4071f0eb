"""One-vs-rest linear SVM trained by dual coordinate descent on the hinge loss.

For each label the solver maximizes the dual

    D(alpha) = sum_i alpha_i - 1/2 ||sum_i alpha_i y_i x_i||^2,   0 <= alpha_i <= C_i

one coordinate at a time, keeping w = sum_i alpha_i y_i x_i up to date. The
bias is the weight of an implicit constant-1 feature, so it is regularized
like any other weight. After each full sweep that has not converged, a few
extra passes run over the free multipliers (0 < alpha_i < C_i) alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..corpus import EMOTIONS, N_LABELS, LabelVector, PredictionMatrix
from ..errors import DimensionMismatch, EmptyTrainingSet
from ..features import FeatureVector, stack


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_sweeps: int = 1000
    seed: int = 0
    shuffle_each_sweep: bool = True
    positive_weight: float | tuple[float, ...] = 1.0
    free_passes: int = 10

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.free_passes < 0:
            raise ValueError("free_passes must be >= 0")
        if isinstance(self.positive_weight, (list, tuple)):
            if len(self.positive_weight) != N_LABELS:
                raise ValueError(f"positive_weight needs {N_LABELS} entries")
            object.__setattr__(self, "positive_weight", tuple(float(v) for v in self.positive_weight))

    def label_positive_weight(self, k: int) -> float:
        pw = self.positive_weight
        return pw[k] if isinstance(pw, tuple) else float(pw)


@dataclass
class TrainingTrace:
    """Per-label solver history: dual objective after every sweep."""

    dual_objective: list[float] = field(default_factory=list)
    max_violation: list[float] = field(default_factory=list)
    alpha: np.ndarray | None = None
    converged: bool = False

    @property
    def sweeps(self) -> int:
        return len(self.dual_objective)


@dataclass
class MultiLabelLinearModel:
    weights: np.ndarray  # (11, d)
    bias: np.ndarray  # (11,)
    config: SvmConfig = field(default_factory=SvmConfig)
    sigmoid_scale: float = 1.0
    labels: tuple[str, ...] = EMOTIONS
    traces: list[TrainingTrace] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.shape[0] != N_LABELS or self.bias.shape != (N_LABELS,):
            raise ValueError(f"expected {N_LABELS} weight vectors and biases")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def margins(self, X) -> np.ndarray:
        X = _as_csr(X)
        if X.shape[1] != self.feature_dim:
            raise DimensionMismatch(f"inputs have {X.shape[1]} features, model expects {self.feature_dim}")
        return np.asarray(X @ self.weights.T) + self.bias

    def to_arrays(self) -> tuple[dict, dict[str, np.ndarray]]:
        meta = {"config": asdict(self.config), "sigmoid_scale": self.sigmoid_scale, "labels": list(self.labels)}
        return meta, {"weights": self.weights, "bias": self.bias}

    @classmethod
    def from_arrays(cls, meta: dict, arrays: dict[str, np.ndarray]) -> "MultiLabelLinearModel":
        cfg = dict(meta["config"])
        if isinstance(cfg.get("positive_weight"), list):
            cfg["positive_weight"] = tuple(cfg["positive_weight"])
        return cls(arrays["weights"], arrays["bias"], SvmConfig(**cfg), meta["sigmoid_scale"], tuple(meta["labels"]))


def _as_csr(X) -> sp.csr_matrix:
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], FeatureVector):
        X = stack(X)
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    return X


@numba.njit(cache=True)
def _sweep(indptr, indices, data, y, alpha, upper, qii, w, order):
    """One pass of coordinate updates; returns the largest projected-gradient violation seen.

    w[-1] is the bias (weight of the constant-1 feature).
    """
    d = w.shape[0] - 1
    worst = 0.0
    for i in order:
        start, end = indptr[i], indptr[i + 1]
        m = w[d]
        for p in range(start, end):
            m += w[indices[p]] * data[p]
        g = y[i] * m - 1.0
        a = alpha[i]
        if a == 0.0:
            pg = min(g, 0.0)
        elif a == upper[i]:
            pg = max(g, 0.0)
        else:
            pg = g
        if abs(pg) > worst:
            worst = abs(pg)
        if pg != 0.0:
            a_new = min(max(a - g / qii[i], 0.0), upper[i])
            step = (a_new - a) * y[i]
            if step != 0.0:
                for p in range(start, end):
                    w[indices[p]] += step * data[p]
                w[d] += step
            alpha[i] = a_new
    return worst


@numba.njit(cache=True)
def _max_violation(indptr, indices, data, y, alpha, upper, w):
    """Largest projected-gradient violation at the current w (no updates)."""
    d = w.shape[0] - 1
    worst = 0.0
    for i in range(y.shape[0]):
        m = w[d]
        for p in range(indptr[i], indptr[i + 1]):
            m += w[indices[p]] * data[p]
        g = y[i] * m - 1.0
        if alpha[i] == 0.0:
            pg = min(g, 0.0)
        elif alpha[i] == upper[i]:
            pg = max(g, 0.0)
        else:
            pg = g
        worst = max(worst, abs(pg))
    return worst


def dual_objective(alpha: np.ndarray, w: np.ndarray) -> float:
    return float(alpha.sum() - 0.5 * np.dot(w, w))


def train_binary(X: sp.csr_matrix, y: np.ndarray, config: SvmConfig, rng: np.random.Generator,
                 positive_weight: float = 1.0) -> tuple[np.ndarray, TrainingTrace]:
    """Solve one label. `y` holds +1/-1; returns (weights with bias appended, trace)."""
    n, d = X.shape
    qii = np.asarray(X.multiply(X).sum(axis=1)).ravel() + 1.0
    upper = np.where(y > 0, config.C * positive_weight, config.C)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    trace = TrainingTrace()
    order = np.arange(n)
    for _ in range(config.max_sweeps):
        if config.shuffle_each_sweep:
            order = rng.permutation(n)
        worst = _sweep(X.indptr, X.indices, X.data, y, alpha, upper, qii, w, order)
        if worst <= config.tolerance:
            # the in-sweep estimate saw a moving w; confirm against the final one
            worst = _max_violation(X.indptr, X.indices, X.data, y, alpha, upper, w)
        trace.dual_objective.append(dual_objective(alpha, w))
        trace.max_violation.append(worst)
        if worst <= config.tolerance:
            trace.converged = True
            break
        # extra passes over the free multipliers only; degenerate duals otherwise crawl
        free = np.flatnonzero((alpha > 0.0) & (alpha < upper))
        for _ in range(config.free_passes if free.size else 0):
            if config.shuffle_each_sweep:
                free = rng.permutation(free)
            if _sweep(X.indptr, X.indices, X.data, y, alpha, upper, qii, w, free) <= 0.1 * config.tolerance:
                break
    trace.alpha = alpha
    return w, trace


def train_svm_ovr(X, Y: Sequence[LabelVector] | np.ndarray, config: SvmConfig = SvmConfig()) -> MultiLabelLinearModel:
    X = _as_csr(X)
    Y = np.array([y.bits for y in Y], dtype=bool) if len(Y) and isinstance(Y[0], LabelVector) else np.asarray(Y, dtype=bool)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("no training examples")
    if Y.shape != (X.shape[0], N_LABELS):
        raise DimensionMismatch(f"{X.shape[0]} inputs but label matrix of shape {Y.shape}")
    weights = np.zeros((N_LABELS, X.shape[1]))
    bias = np.zeros(N_LABELS)
    traces = []
    for k in range(N_LABELS):
        # label-specific stream: label k never depends on the other columns
        rng = np.random.default_rng([config.seed, k])
        y = np.where(Y[:, k], 1.0, -1.0)
        w, trace = train_binary(X, y, config, rng, config.label_positive_weight(k))
        weights[k], bias[k] = w[:-1], w[-1]
        traces.append(trace)
    return MultiLabelLinearModel(weights, bias, config, traces=traces)


def predict(model: MultiLabelLinearModel, X, ids: Sequence[str] | None = None) -> PredictionMatrix:
    margins = model.margins(X)
    if ids is None:
        ids = [str(i) for i in range(margins.shape[0])]
    return PredictionMatrix(tuple(ids), expit(model.sigmoid_scale * margins), 0.5)
