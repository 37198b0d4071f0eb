"""Word attribution by random word removal, and side-by-side model comparison reports.

A word's score for a label is the mean, over every variant sentence that still
contains the word, of (fraction of words kept) x (predicted probability of the
label for that variant). Variants are word-subset masks over the
whitespace-split input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import EMOTIONS, N_LABELS, Dataset, PredictionMatrix, emotion_index
from .errors import EmptyText, PredictorFailure
from .metrics import jaccard_rows, jaccard_difference


@dataclass(frozen=True)
class ExplainConfig:
    n_variants: int = 1000
    keep_probability: float = 0.5
    exhaustive_max_words: int = 12
    seed: int = 0
    include_empty_variant: bool = False

    def __post_init__(self):
        if self.n_variants < 1:
            raise ValueError("n_variants must be >= 1")
        if not 0.0 < self.keep_probability < 1.0:
            raise ValueError("keep_probability must lie in (0, 1)")
        if self.exhaustive_max_words < 0:
            raise ValueError("exhaustive_max_words must be >= 0")


@dataclass(frozen=True, eq=False)
class Attribution:
    words: tuple[str, ...]  # one entry per position
    scores: np.ndarray  # (n_words, 11)
    n_variants: int = 0

    def score(self, position: int, label: int | str) -> float:
        k = emotion_index(label) if isinstance(label, str) else label
        return float(self.scores[position, k])

    def top(self, label: int | str, k: int = 5) -> list[tuple[int, str, float]]:
        """Highest-scoring word positions for one label; ties keep sentence order."""
        col = emotion_index(label) if isinstance(label, str) else label
        order = np.argsort(-self.scores[:, col], kind="stable")[:k]
        return [(int(i), self.words[i], float(self.scores[i, col])) for i in order]

    def by_type(self) -> dict[str, np.ndarray]:
        """Mean score over repeated occurrences of the same word."""
        out: dict[str, list[np.ndarray]] = {}
        for w, row in zip(self.words, self.scores):
            out.setdefault(w, []).append(row)
        return {w: np.mean(rows, axis=0) for w, rows in out.items()}


def variant_masks(n_words: int, config: ExplainConfig) -> np.ndarray:
    """Boolean (n_variants, n_words) masks; row 0 is always the full sentence."""
    if n_words <= config.exhaustive_max_words:
        codes = np.arange((1 << n_words) - 1, -1 if config.include_empty_variant else 0, -1)
        return ((codes[:, None] >> np.arange(n_words)) & 1).astype(bool)
    rng = np.random.default_rng(config.seed)
    sampled = rng.random((config.n_variants - 1, n_words)) < config.keep_probability
    if not config.include_empty_variant:
        sampled = sampled[sampled.any(axis=1)]
    return np.vstack([np.ones((1, n_words), dtype=bool), sampled])


def _predict_variants(predict_fn, texts: list[str], batched: bool) -> np.ndarray:
    if batched:
        try:
            probs = np.asarray(predict_fn(texts), dtype=np.float64)
        except Exception as err:
            raise PredictorFailure(f"predictor failed on a batch of {len(texts)} variants: {err}") from err
    else:
        rows = []
        for text in texts:
            try:
                rows.append(np.asarray(predict_fn(text), dtype=np.float64))
            except Exception as err:
                raise PredictorFailure(f"predictor failed on variant {text!r}: {err}") from err
        probs = np.array(rows)
    if probs.shape != (len(texts), N_LABELS):
        raise PredictorFailure(f"predictor returned shape {probs.shape}, expected ({len(texts)}, {N_LABELS})")
    return probs


def explain(
    predict_fn: Callable,
    text: str,
    config: ExplainConfig = ExplainConfig(),
    batched: bool = False,
) -> Attribution:
    """Attribute the predictor's 11 label probabilities to the words of `text`.

    `predict_fn` maps one text to 11 probabilities, or a list of texts to an
    (m, 11) array when `batched` is true.
    """
    words = text.split()
    if not words:
        raise EmptyText("cannot explain an empty text")
    masks = variant_masks(len(words), config)
    texts = [" ".join(w for w, keep in zip(words, mask) if keep) for mask in masks]
    probs = _predict_variants(predict_fn, texts, batched)
    weight = masks.sum(axis=1) / len(words)
    contrib = weight[:, None] * probs  # (v, 11)
    m = masks.astype(np.float64)
    counts = m.sum(axis=0)
    scores = (m.T @ contrib) / counts[:, None]
    return Attribution(tuple(words), scores, len(masks))


# -- model comparison -------------------------------------------------------


@dataclass
class ComparedExample:
    id: str
    text: str
    gold: list[str]
    decisions_a: list[str]
    decisions_b: list[str]
    jaccard_a: float
    jaccard_b: float
    top_a: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    top_b: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    @property
    def better(self) -> str:
        if self.jaccard_a > self.jaccard_b:
            return "A"
        if self.jaccard_b > self.jaccard_a:
            return "B"
        return "tie"


@dataclass
class ComparisonReport:
    name_a: str
    name_b: str
    examples: list[ComparedExample]

    def to_json(self) -> str:
        payload = {
            "model_a": self.name_a,
            "model_b": self.name_b,
            "examples": [
                {
                    "id": ex.id,
                    "text": ex.text,
                    "gold": ex.gold,
                    "decisions_a": ex.decisions_a,
                    "decisions_b": ex.decisions_b,
                    "jaccard_a": ex.jaccard_a,
                    "jaccard_b": ex.jaccard_b,
                    "better": ex.better,
                    "top_a": {k: [[w, s] for w, s in v] for k, v in ex.top_a.items()},
                    "top_b": {k: [[w, s] for w, s in v] for k, v in ex.top_b.items()},
                }
                for ex in self.examples
            ],
        }
        return json.dumps(payload, ensure_ascii=False, indent=1) + "\n"

    def to_text(self) -> str:
        out = [f"A = {self.name_a}", f"B = {self.name_b}", f"examples: {len(self.examples)}", ""]
        for ex in self.examples:
            out.append(f"== {ex.id}  (better: {ex.better}; J_A={ex.jaccard_a:.3f} J_B={ex.jaccard_b:.3f})")
            out.append(f"text: {ex.text}")
            out.append(f"gold: {', '.join(ex.gold) or '-'}")
            out.append(f"A:    {', '.join(ex.decisions_a) or '-'}")
            out.append(f"B:    {', '.join(ex.decisions_b) or '-'}")
            for label in EMOTIONS:
                a = " ".join(f"{w}:{s:.3f}" for w, s in ex.top_a.get(label, []))
                b = " ".join(f"{w}:{s:.3f}" for w, s in ex.top_b.get(label, []))
                out.append(f"  {label:<12} A| {a}")
                out.append(f"  {'':<12} B| {b}")
            out.append("")
        return "\n".join(out)


def select_disagreements(diff: np.ndarray, k: int, balanced: bool = False,
                         ids: Sequence[str] | None = None) -> list[int]:
    """Indices of the k largest |diff|; ties go to the smaller id (or position when ids are absent).

    With `balanced`, half the picks come from each sign (A better / B better).
    """
    diff = np.asarray(diff, dtype=np.float64)
    k = min(k, diff.size)
    if k <= 0:
        return []
    tie = list(ids) if ids is not None else list(range(diff.size))

    def ranked(key):
        return sorted(range(diff.size), key=lambda i: (key(i), tie[i]))

    if not balanced:
        return ranked(lambda i: -abs(diff[i]))[:k]
    pos = [i for i in ranked(lambda i: -diff[i]) if diff[i] > 0]
    neg = [i for i in ranked(lambda i: diff[i]) if diff[i] < 0]
    half = k // 2
    chosen = pos[:k - half] + neg[:half]
    # one side short of picks: top up with the remaining largest |diff|
    taken = set(chosen)
    chosen += [i for i in ranked(lambda i: -abs(diff[i])) if i not in taken][:k - len(chosen)]
    return sorted(chosen, key=lambda i: (-abs(diff[i]), tie[i]))


def compare_models(
    preds_a: PredictionMatrix,
    preds_b: PredictionMatrix,
    gold: Dataset,
    model_a_fn: Callable,
    model_b_fn: Callable,
    k: int = 100,
    config: ExplainConfig = ExplainConfig(),
    top_n: int = 5,
    batched: bool = False,
    names: tuple[str, str] = ("A", "B"),
    balanced: bool = False,
) -> ComparisonReport:
    if k > len(gold):
        raise ValueError(f"k={k} exceeds the {len(gold)} available examples")
    diff = jaccard_difference(preds_a, preds_b, gold)
    A = preds_a.aligned_to(gold.ids).decisions
    B = preds_b.aligned_to(gold.ids).decisions
    G = gold.label_matrix()
    ja, jb = jaccard_rows(A, G), jaccard_rows(B, G)

    def names_of(row):
        return [EMOTIONS[j] for j in np.flatnonzero(row)]

    out = []
    for i in select_disagreements(diff, k, balanced, gold.ids):
        ex = gold.examples[i]
        att_a = explain(model_a_fn, ex.text, config, batched)
        att_b = explain(model_b_fn, ex.text, config, batched)
        out.append(ComparedExample(
            ex.id, ex.text, names_of(G[i]), names_of(A[i]), names_of(B[i]), float(ja[i]), float(jb[i]),
            {lab: [(w, s) for _, w, s in att_a.top(lab, top_n)] for lab in EMOTIONS},
            {lab: [(w, s) for _, w, s in att_b.top(lab, top_n)] for lab in EMOTIONS},
        ))
    return ComparisonReport(names[0], names[1], out)


__all__ = [
    "Attribution", "ComparedExample", "ComparisonReport", "ExplainConfig",
    "compare_models", "explain", "select_disagreements", "variant_masks",
]
