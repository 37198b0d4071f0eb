"""Multi-label evaluation: sample-averaged Jaccard, macro-F1, mean per-label accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EMOTIONS, N_LABELS, Dataset, LabelVector, PredictionMatrix
from .errors import IdMismatch, MalformedLabel


@dataclass(frozen=True)
class EvalReport:
    jaccard: float
    macro_f1: float
    avg_accuracy: float
    per_class_f1: tuple[float, ...]
    n_examples: int
    exact_match: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "per_class_f1", tuple(float(v) for v in self.per_class_f1))
        if len(self.per_class_f1) != N_LABELS:
            raise ValueError(f"per_class_f1 needs {N_LABELS} values")

    def to_kv(self) -> str:
        lines = [
            f"n_examples={self.n_examples}",
            f"jaccard={self.jaccard!r}",
            f"macro_f1={self.macro_f1!r}",
            f"avg_accuracy={self.avg_accuracy!r}",
            f"exact_match={self.exact_match!r}",
        ]
        lines += [f"f1.{name}={v!r}" for name, v in zip(EMOTIONS, self.per_class_f1)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "EvalReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(
            float(kv["jaccard"]),
            float(kv["macro_f1"]),
            float(kv["avg_accuracy"]),
            tuple(float(kv[f"f1.{name}"]) for name in EMOTIONS),
            int(kv["n_examples"]),
            float(kv.get("exact_match", 0.0)),
        )

    def to_text(self) -> str:
        rows = [("J", self.jaccard), ("F", self.macro_f1), ("A", self.avg_accuracy), ("exact", self.exact_match)]
        out = [f"examples  {self.n_examples}"]
        out += [f"{name:<8}  {pct(v):>5}" for name, v in rows]
        out.append("")
        out.append(per_class_table([("F1", self)]))
        return "\n".join(out)


def pct(value: float) -> str:
    return f"{100.0 * value:.1f}"


def jaccard_sample(pred: LabelVector | np.ndarray, gold: LabelVector | np.ndarray) -> float:
    p = np.asarray(pred.bits if isinstance(pred, LabelVector) else pred, dtype=bool)
    g = np.asarray(gold.bits if isinstance(gold, LabelVector) else gold, dtype=bool)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def jaccard_rows(P: np.ndarray, G: np.ndarray) -> np.ndarray:
    inter = np.count_nonzero(P & G, axis=1)
    union = np.count_nonzero(P | G, axis=1)
    return np.divide(inter, union, out=np.ones(P.shape[0]), where=union > 0)


def _aligned(preds: PredictionMatrix, gold: Dataset) -> tuple[np.ndarray, np.ndarray]:
    if not gold.labeled:
        raise MalformedLabel("gold dataset must be labeled")
    return preds.aligned_to(gold.ids).decisions, gold.label_matrix()


def evaluate_arrays(P: np.ndarray, G: np.ndarray) -> EvalReport:
    P = np.asarray(P, dtype=bool)
    G = np.asarray(G, dtype=bool)
    if P.shape != G.shape or P.ndim != 2 or P.shape[1] != N_LABELS:
        raise IdMismatch(f"prediction shape {P.shape} does not match gold shape {G.shape}")
    n = P.shape[0]
    if n == 0:
        raise ValueError("cannot evaluate zero examples")
    tp = np.count_nonzero(P & G, axis=0)
    fp = np.count_nonzero(P & ~G, axis=0)
    fn = np.count_nonzero(~P & G, axis=0)
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(N_LABELS), where=denom > 0)
    return EvalReport(
        jaccard=float(jaccard_rows(P, G).mean()),
        macro_f1=float(f1.mean()),
        avg_accuracy=float(np.count_nonzero(P == G, axis=0).mean() / n),
        per_class_f1=tuple(f1.tolist()),
        n_examples=n,
        exact_match=float(np.all(P == G, axis=1).mean()),
    )


def evaluate(preds: PredictionMatrix, gold: Dataset) -> EvalReport:
    """Score predictions against gold labels, aligning rows by example id."""
    return evaluate_arrays(*_aligned(preds, gold))


def jaccard_difference(preds_a: PredictionMatrix, preds_b: PredictionMatrix, gold: Dataset) -> np.ndarray:
    """Per-example J(A) - J(B), in gold order."""
    A, G = _aligned(preds_a, gold)
    B, _ = _aligned(preds_b, gold)
    return jaccard_rows(A, G) - jaccard_rows(B, G)


def per_class_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Per-emotion F1 (x100) with one row per model."""
    width = max([len("Model")] + [len(name) for name, _ in rows])
    head = "Model".ljust(width) + "".join(f"  {name[:5]:>5}" for name in EMOTIONS)
    lines = [head]
    for name, report in rows:
        lines.append(name.ljust(width) + "".join(f"  {pct(v):>5}" for v in report.per_class_f1))
    return "\n".join(lines)
