"""Emotion label space and the TSV formats for datasets, parallel corpora and predictions."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptySide,
    EmptyText,
    IdMismatch,
    MalformedLabel,
    MalformedLine,
    MissingColumn,
    ProbabilityOutOfRange,
    RowWidthMismatch,
    UnknownLabel,
)

EMOTIONS: tuple[str, ...] = (
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "love",
    "optimism",
    "pessimism",
    "sadness",
    "surprise",
    "trust",
)
N_LABELS = len(EMOTIONS)
_EMOTION_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

SPLITS = ("train", "dev", "test", "projected", "translated")
DEFAULT_THRESHOLD = 0.5


def emotion_index(name: str) -> int:
    """Canonical column of an emotion name (case-insensitive)."""
    try:
        return _EMOTION_INDEX[name.strip().lower()]
    except KeyError:
        raise UnknownLabel(f"unknown emotion label {name!r}") from None


@dataclass(frozen=True)
class LabelVector:
    bits: tuple[bool, ...] = (False,) * N_LABELS

    def __post_init__(self):
        if len(self.bits) != N_LABELS:
            raise ValueError(f"label vector needs {N_LABELS} bits, got {len(self.bits)}")
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @classmethod
    def from_array(cls, arr: Iterable) -> "LabelVector":
        return cls(tuple(bool(b) for b in arr))

    def count(self) -> int:
        return sum(self.bits)

    def names(self) -> list[str]:
        return [name for name, b in zip(EMOTIONS, self.bits) if b]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def __getitem__(self, key: int | str) -> bool:
        if isinstance(key, str):
            key = emotion_index(key)
        return self.bits[key]

    def __iter__(self) -> Iterator[bool]:
        return iter(self.bits)

    def __len__(self) -> int:
        return N_LABELS


def label_vector_from_names(names: Sequence[str]) -> LabelVector:
    bits = [False] * N_LABELS
    for name in names:
        bits[emotion_index(name)] = True
    return LabelVector(tuple(bits))


@dataclass(frozen=True)
class Example:
    id: str
    text: str
    labels: LabelVector | None = None


@dataclass(frozen=True)
class Dataset:
    language: str
    split: str
    examples: tuple[Example, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DuplicateId(f"duplicate id {ex.id!r}")
            seen.add(ex.id)
            if not ex.text.strip():
                raise EmptyText(f"example {ex.id!r} has empty text")
        labeled = {ex.labels is not None for ex in self.examples}
        if len(labeled) > 1:
            raise MalformedLabel("dataset mixes labeled and unlabeled examples")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    @property
    def labeled(self) -> bool:
        return bool(self.examples) and self.examples[0].labels is not None

    @property
    def ids(self) -> list[str]:
        return [ex.id for ex in self.examples]

    @property
    def texts(self) -> list[str]:
        return [ex.text for ex in self.examples]

    def label_matrix(self) -> np.ndarray:
        """(n, 11) boolean matrix; raises if the dataset is unlabeled."""
        if self.examples and not self.labeled:
            raise MalformedLabel("dataset is unlabeled")
        if not self.examples:
            return np.zeros((0, N_LABELS), dtype=bool)
        return np.array([ex.labels.bits for ex in self.examples], dtype=bool)

    def index(self) -> dict[str, int]:
        return {ex.id: i for i, ex in enumerate(self.examples)}


@dataclass(frozen=True)
class ParallelPair:
    pair_id: str
    source_text: str
    target_text: str

    def __post_init__(self):
        if not self.source_text.strip() or not self.target_text.strip():
            raise EmptySide(f"pair {self.pair_id!r} has an empty side")


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Per-example probabilities for the 11 emotions plus the decision threshold.

    Decisions are always derived from the stored probabilities: label k is
    predicted iff probability > threshold.
    """

    example_ids: tuple[str, ...]
    probabilities: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    _decisions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ids = tuple(self.example_ids)
        probs = np.array(self.probabilities, dtype=np.float64).reshape(-1, N_LABELS) \
            if len(ids) == 0 else np.array(self.probabilities, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] != N_LABELS:
            raise RowWidthMismatch(f"probabilities must have shape (n, {N_LABELS}), got {probs.shape}")
        if probs.shape[0] != len(ids):
            raise RowWidthMismatch(f"{probs.shape[0]} probability rows for {len(ids)} ids")
        if len(set(ids)) != len(ids):
            raise DuplicateId("duplicate id in prediction matrix")
        if not np.all((probs >= 0.0) & (probs <= 1.0)):
            raise ProbabilityOutOfRange("probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "example_ids", ids)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "threshold", float(self.threshold))
        dec = probs > self.threshold
        dec.setflags(write=False)
        object.__setattr__(self, "_decisions", dec)

    @property
    def decisions(self) -> np.ndarray:
        return self._decisions

    def __len__(self) -> int:
        return len(self.example_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.example_ids == other.example_ids
            and self.threshold == other.threshold
            and np.array_equal(self.probabilities, other.probabilities)
        )

    def label_vector(self, i: int) -> LabelVector:
        return LabelVector.from_array(self._decisions[i])

    def index(self) -> dict[str, int]:
        return {eid: i for i, eid in enumerate(self.example_ids)}

    def aligned_to(self, ids: Sequence[str]) -> "PredictionMatrix":
        """Reorder rows to `ids`; the id sets must match exactly."""
        ids = list(ids)
        if set(ids) != set(self.example_ids) or len(ids) != len(self.example_ids):
            missing = sorted(set(ids) - set(self.example_ids))[:5]
            extra = sorted(set(self.example_ids) - set(ids))[:5]
            raise IdMismatch(f"prediction ids do not match (missing {missing}, extra {extra})")
        if tuple(ids) == self.example_ids:
            return self
        pos = self.index()
        order = [pos[i] for i in ids]
        return PredictionMatrix(tuple(ids), self.probabilities[order], self.threshold)


# -- reading ----------------------------------------------------------------


def _read_lines(path: str | Path) -> list[str]:
    raw = Path(path).read_bytes()
    text = raw.decode("utf-8-sig")
    # only \n (and \r\n) end a row; unicode line separators may occur inside tweets
    lines = [line[:-1] if line.endswith("\r") else line for line in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _split_row(line: str) -> list[str]:
    return line.rstrip("\r\n").split("\t")


def _label_columns(header: list[str], start: int) -> list[int]:
    """Map canonical emotion index -> column position."""
    cols = {}
    for pos, name in enumerate(header[start:], start=start):
        k = emotion_index(name)
        if k in cols.values():
            raise MalformedLabel(f"label column {name!r} repeated")
        cols[pos] = k
    by_label = {k: pos for pos, k in cols.items()}
    missing = [EMOTIONS[k] for k in range(N_LABELS) if k not in by_label]
    if missing:
        raise MissingColumn(f"missing label columns: {', '.join(missing)}")
    return [by_label[k] for k in range(N_LABELS)]


def parse_dataset(path: str | Path, expect_labels: bool, language: str = "", split: str = "train") -> Dataset:
    lines = _read_lines(path)
    if not lines:
        raise MissingColumn(f"{path}: no header line")
    header = [h.strip() for h in _split_row(lines[0])]
    if len(header) < 2 or header[0].lower() != "id" or header[1].lower() != "tweet":
        raise MissingColumn(f"{path}: header must start with ID and Tweet columns, got {header[:2]}")
    label_pos: list[int] = []
    if expect_labels:
        label_pos = _label_columns(header, 2)
    width = len(header)

    examples = []
    for lineno, line in enumerate(lines[1:], start=2):
        row = _split_row(line)
        if len(row) != width:
            raise RowWidthMismatch(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        labels = None
        if expect_labels:
            bits = []
            for pos in label_pos:
                cell = row[pos].strip()
                if cell not in ("0", "1"):
                    raise MalformedLabel(f"{path}:{lineno}: label cell {cell!r} not in {{0,1}}")
                bits.append(cell == "1")
            labels = LabelVector(tuple(bits))
        if not row[1].strip():
            raise EmptyText(f"{path}:{lineno}: empty text for id {row[0]!r}")
        examples.append(Example(row[0], row[1], labels))
    try:
        return Dataset(language, split, tuple(examples))
    except DuplicateId as err:
        raise DuplicateId(f"{path}: {err}") from None


def serialize_dataset(dataset: Dataset, with_labels: bool | None = None) -> str:
    """TSV text; `with_labels` defaults to whether the dataset is labeled."""
    if with_labels is None:
        with_labels = dataset.labeled
    if with_labels and dataset.examples and not dataset.labeled:
        raise MalformedLabel("cannot write label columns for an unlabeled dataset")
    out = io.StringIO()
    header = ["ID", "Tweet"]
    if with_labels:
        header += list(EMOTIONS)
    out.write("\t".join(header) + "\n")
    for ex in dataset:
        row = [ex.id, ex.text]
        if ex.labels is not None:
            row += ["1" if b else "0" for b in ex.labels.bits]
        out.write("\t".join(row) + "\n")
    return out.getvalue()


def write_dataset(dataset: Dataset, path: str | Path, with_labels: bool | None = None) -> None:
    Path(path).write_text(serialize_dataset(dataset, with_labels), encoding="utf-8")


def parse_parallel(path: str | Path) -> list[ParallelPair]:
    lines = _read_lines(path)
    if not lines:
        raise MissingColumn(f"{path}: no header line")
    header = [h.strip().lower() for h in _split_row(lines[0])]
    try:
        cols = [header.index(c) for c in ("pair_id", "source_text", "target_text")]
    except ValueError:
        raise MissingColumn(f"{path}: header needs pair_id, source_text, target_text; got {header}") from None
    pairs = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        row = _split_row(line)
        if len(row) != len(header):
            raise RowWidthMismatch(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        pid, src, tgt = (row[c] for c in cols)
        if pid in seen:
            raise DuplicateId(f"{path}:{lineno}: duplicate pair_id {pid!r}")
        seen.add(pid)
        try:
            pairs.append(ParallelPair(pid, src, tgt))
        except EmptySide as err:
            raise EmptySide(f"{path}:{lineno}: {err}") from None
    return pairs


def serialize_parallel(pairs: Sequence[ParallelPair]) -> str:
    lines = ["pair_id\tsource_text\ttarget_text"]
    lines += [f"{p.pair_id}\t{p.source_text}\t{p.target_text}" for p in pairs]
    return "\n".join(lines) + "\n"


def format_probability(p: float) -> str:
    # shortest repr that round-trips, never fewer than 6 decimals
    return np.format_float_positional(p, unique=True, trim="k", min_digits=6)


def parse_predictions(path: str | Path) -> PredictionMatrix:
    lines = _read_lines(path)
    threshold = DEFAULT_THRESHOLD
    if lines and lines[0].startswith("#"):
        key, _, value = lines[0][1:].strip().partition("=")
        if key.strip() != "threshold":
            raise MalformedLine(f"{path}:1: unrecognised comment line {lines[0]!r}")
        try:
            threshold = float(value)
        except ValueError:
            raise MalformedLine(f"{path}:1: bad threshold {value!r}") from None
        lines = lines[1:]
    if not lines:
        raise MissingColumn(f"{path}: no header line")
    header = [h.strip() for h in _split_row(lines[0])]
    if header[0].lower() != "id":
        raise MissingColumn(f"{path}: first column must be ID")
    label_pos = _label_columns(header, 1)

    ids, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        row = _split_row(line)
        if len(row) != len(header):
            raise RowWidthMismatch(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            values = [float(row[pos]) for pos in label_pos]
        except ValueError:
            raise MalformedLine(f"{path}:{lineno}: non-numeric probability") from None
        for v in values:
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise ProbabilityOutOfRange(f"{path}:{lineno}: probability {v} outside [0, 1]")
        ids.append(row[0])
        rows.append(values)
    probs = np.array(rows, dtype=np.float64).reshape(len(rows), N_LABELS)
    try:
        return PredictionMatrix(tuple(ids), probs, threshold)
    except DuplicateId as err:
        raise DuplicateId(f"{path}: {err}") from None


def serialize_predictions(preds: PredictionMatrix) -> str:
    out = io.StringIO()
    out.write(f"# threshold={preds.threshold!r}\n")
    out.write("\t".join(("ID",) + EMOTIONS) + "\n")
    for eid, row in zip(preds.example_ids, preds.probabilities):
        out.write(eid + "\t" + "\t".join(format_probability(p) for p in row) + "\n")
    return out.getvalue()


def write_predictions(preds: PredictionMatrix, path: str | Path) -> None:
    Path(path).write_text(serialize_predictions(preds), encoding="utf-8")


def concat_datasets(parts: Sequence[Dataset], language: str, split: str = "train") -> Dataset:
    examples = [ex for part in parts for ex in part]
    return Dataset(language, split, tuple(examples))
