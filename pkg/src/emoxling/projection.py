"""Label projection over a parallel corpus.

The source side is tagged (normally from an external prediction file), pairs
are filtered by how many emotions the tagger assigned, and the surviving
target-side texts inherit the source labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .corpus import N_LABELS, Dataset, Example, LabelVector, ParallelPair, PredictionMatrix

Comparison = Literal["at_least", "more_than"]


@dataclass(frozen=True)
class ProjectionConfig:
    min_emotions: int = 3
    # at_least: count >= min_emotions; more_than: count > min_emotions
    comparison: Comparison = "at_least"
    source_threshold: float = 0.5

    def __post_init__(self):
        comparison = self.comparison.replace("-", "_")
        if comparison not in ("at_least", "more_than"):
            raise ValueError(f"comparison must be at_least or more_than, got {self.comparison!r}")
        object.__setattr__(self, "comparison", comparison)
        if not 0 <= self.min_emotions <= N_LABELS:
            raise ValueError(f"min_emotions must be in [0, {N_LABELS}]")

    def keeps(self, count: int) -> bool:
        if self.comparison == "at_least":
            return count >= self.min_emotions
        return count > self.min_emotions


@dataclass(frozen=True)
class FilterReport:
    histogram: tuple[int, ...]  # pairs by number of predicted emotions, 0..11
    retained: int
    total: int
    config: ProjectionConfig

    @property
    def retention(self) -> float:
        return self.retained / self.total if self.total else 0.0

    def to_text(self) -> str:
        op = ">=" if self.config.comparison == "at_least" else ">"
        lines = [
            f"filter: predicted emotions {op} {self.config.min_emotions} "
            f"(source threshold {self.config.source_threshold})",
            f"pairs: {self.total}",
            f"retained: {self.retained} ({100 * self.retention:.1f}%)",
            "",
            "emotions  pairs  kept",
        ]
        for count, n in enumerate(self.histogram):
            lines.append(f"{count:>8}  {n:>5}  {'yes' if self.config.keeps(count) else 'no'}")
        return "\n".join(lines) + "\n"


def _source_decisions(pairs: Sequence[ParallelPair], preds: PredictionMatrix, threshold: float) -> np.ndarray:
    aligned = preds.aligned_to([p.pair_id for p in pairs])
    return aligned.probabilities > threshold


def project_labels(
    pairs: Sequence[ParallelPair],
    source_preds: PredictionMatrix,
    config: ProjectionConfig = ProjectionConfig(),
    language: str = "",
) -> Dataset:
    decisions = _source_decisions(pairs, source_preds, config.source_threshold)
    examples = [
        Example(pair.pair_id, pair.target_text, LabelVector.from_array(row))
        for pair, row in zip(pairs, decisions)
        if config.keeps(int(row.sum()))
    ]
    return Dataset(language, "projected", tuple(examples))


def filter_report(
    pairs: Sequence[ParallelPair],
    source_preds: PredictionMatrix,
    config: ProjectionConfig = ProjectionConfig(),
) -> FilterReport:
    counts = _source_decisions(pairs, source_preds, config.source_threshold).sum(axis=1)
    histogram = np.bincount(counts.astype(np.int64), minlength=N_LABELS + 1)
    retained = sum(int(n) for c, n in enumerate(histogram) if config.keeps(c))
    return FilterReport(tuple(int(n) for n in histogram), retained, len(pairs), config)
