"""Text normalization and the feature spaces: tf-idf n-grams, embedding averages, block concatenation."""

from __future__ import annotations

import re
import unicodedata
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Dataset
from .errors import DimensionMismatch, EmptyCorpus, MalformedLine, MissingEmbedding


@dataclass(frozen=True)
class NormalizationConfig:
    lowercase: bool = True
    url_token: str = "<url>"
    user_token: str = "<user>"
    strip_control: bool = True

    def __post_init__(self):
        for tok in (self.url_token, self.user_token):
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"replacement token {tok!r} must be non-empty and contain no whitespace")


@dataclass(frozen=True)
class NgramConfig:
    unit: Literal["word", "char"] = "char"
    n_min: int | None = None
    n_max: int | None = None
    min_df: int = 1

    def __post_init__(self):
        if self.unit not in ("word", "char"):
            raise ValueError(f"unit must be 'word' or 'char', got {self.unit!r}")
        default = (1, 6) if self.unit == "char" else (1, 1)
        if self.n_min is None:
            object.__setattr__(self, "n_min", default[0])
        if self.n_max is None:
            object.__setattr__(self, "n_max", default[1])
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if self.min_df < 1:
            raise ValueError("min_df must be >= 1")


# Combining marks (Latin accents, Arabic harakat) stay inside words.
_MARKS = "\u0300-\u036f\u0610-\u061a\u064b-\u065f\u0670\u06d6-\u06ed"
_TOKEN_RE = re.compile(
    r"(?P<url>(?:https?://|www\.)\S+)"
    r"|(?P<user>@\w+)"
    rf"|(?P<word>[\w{_MARKS}]+)"
    rf"|(?P<punct>[^\w\s{_MARKS}]+)"
)


def _strip_control(text: str) -> str:
    return "".join(
        " " if c in "\t\n\r" else c
        for c in text
        if c in "\t\n\r" or unicodedata.category(c) not in ("Cc", "Cf")
    )


def tokenize(text: str, config: NormalizationConfig = NormalizationConfig()) -> list[str]:
    if config.strip_control:
        text = _strip_control(text)
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "url":
            tokens.append(config.url_token)
        elif kind == "user":
            tokens.append(config.user_token)
        else:
            tok = m.group()
            tokens.append(tok.lower() if config.lowercase else tok)
    return tokens


def normalize(text: str, config: NormalizationConfig = NormalizationConfig()) -> str:
    """Normalized surface string: URLs/mentions replaced, case folded, whitespace collapsed.

    Unlike `tokenize`, punctuation stays attached to words, so character
    n-grams see the original spelling.
    """
    if config.strip_control:
        text = _strip_control(text)

    def repl(m: re.Match) -> str:
        if m.lastgroup == "url":
            return config.url_token
        if m.lastgroup == "user":
            return config.user_token
        return m.group().lower() if config.lowercase else m.group()

    text = _TOKEN_RE.sub(repl, text)
    return " ".join(text.split())


def extract_ngrams(
    text_or_tokens: str | Sequence[str],
    config: NgramConfig,
    normalization: NormalizationConfig | None = None,
) -> Counter:
    """Multiset of n-gram terms.

    Char mode slides over the given string verbatim (a token list is joined
    with single spaces). Word mode tokenizes strings first.
    """
    if config.unit == "char":
        s = text_or_tokens if isinstance(text_or_tokens, str) else " ".join(text_or_tokens)
        if normalization is not None:
            s = normalize(s, normalization)
        grams = (s[i:i + n] for n in range(config.n_min, config.n_max + 1) for i in range(len(s) - n + 1))
        return Counter(grams)
    if isinstance(text_or_tokens, str):
        tokens = tokenize(text_or_tokens, normalization or NormalizationConfig())
    else:
        tokens = list(text_or_tokens)
    grams = (
        " ".join(tokens[i:i + n])
        for n in range(config.n_min, config.n_max + 1)
        for i in range(len(tokens) - n + 1)
    )
    return Counter(grams)


def _l2(values: np.ndarray) -> float:
    # scaled by the largest entry so tiny or huge values neither underflow nor overflow
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    scaled = values / peak
    return peak * float(np.sqrt(np.dot(scaled, scaled)))


def _unit(values: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(values))
    scaled = values / peak
    return scaled / np.sqrt(np.dot(scaled, scaled))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Sparse vector: strictly increasing indices, no stored zeros."""

    dimension: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d and equally long")
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dimension:
                raise DimensionMismatch(f"index out of range for dimension {self.dimension}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, arr) -> "FeatureVector":
        arr = np.asarray(arr, dtype=np.float64)
        idx = np.flatnonzero(arr)
        return cls(arr.size, idx, arr[idx])

    @classmethod
    def zeros(cls, dimension: int) -> "FeatureVector":
        return cls(dimension, np.empty(0, np.int64), np.empty(0))

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    def norm(self) -> float:
        return _l2(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


def stack(vectors: Sequence[FeatureVector]) -> sp.csr_matrix:
    if not vectors:
        raise ValueError("cannot stack an empty list of vectors")
    dim = vectors[0].dimension
    for v in vectors:
        if v.dimension != dim:
            raise DimensionMismatch(f"mixed feature dimensions {dim} and {v.dimension}")
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([v.indices.size for v in vectors])
    indices = np.concatenate([v.indices for v in vectors]) if indptr[-1] else np.empty(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if indptr[-1] else np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def unstack(X) -> list[FeatureVector]:
    X = sp.csr_matrix(X)
    X.sort_indices()
    return [
        FeatureVector(X.shape[1], X.indices[X.indptr[i]:X.indptr[i + 1]], X.data[X.indptr[i]:X.indptr[i + 1]])
        for i in range(X.shape[0])
    ]


# -- tf-idf -----------------------------------------------------------------


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    document_frequency: np.ndarray
    n_documents: int
    config: NgramConfig
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)

    @property
    def idf(self) -> np.ndarray:
        return np.log((1.0 + self.n_documents) / (1.0 + self.document_frequency)) + 1.0

    def terms(self, text: str) -> Counter:
        return extract_ngrams(text, self.config, self.normalization)


def fit_tfidf(
    corpus: Dataset | Iterable[str],
    config: NgramConfig = NgramConfig(),
    normalization: NormalizationConfig = NormalizationConfig(),
) -> TfidfModel:
    texts = corpus.texts if isinstance(corpus, Dataset) else list(corpus)
    if not texts:
        raise EmptyCorpus("cannot fit tf-idf on an empty corpus")
    df: dict[str, int] = {}  # insertion order == first occurrence
    for text in texts:
        for term in extract_ngrams(text, config, normalization):
            df[term] = df.get(term, 0) + 1
    kept = [t for t, c in df.items() if c >= config.min_df]
    vocab = {t: i for i, t in enumerate(kept)}
    return TfidfModel(vocab, np.array([df[t] for t in kept], dtype=np.int64), len(texts), config, normalization)


def _tfidf_entries(model: TfidfModel, idf: np.ndarray, text: str) -> tuple[np.ndarray, np.ndarray]:
    counts = model.terms(text)
    pairs = sorted((model.vocabulary[t], c) for t, c in counts.items() if t in model.vocabulary)
    if not pairs:
        return np.empty(0, np.int64), np.empty(0)
    idx = np.array([p[0] for p in pairs], dtype=np.int64)
    val = np.array([p[1] for p in pairs], dtype=np.float64) * idf[idx]
    return idx, val / np.sqrt(np.dot(val, val))


def transform_tfidf(model: TfidfModel, text: str) -> FeatureVector:
    idx, val = _tfidf_entries(model, model.idf, text)
    return FeatureVector(model.dimension, idx, val)


def transform_tfidf_many(model: TfidfModel, texts: Sequence[str]) -> sp.csr_matrix:
    idf = model.idf
    rows = [_tfidf_entries(model, idf, t) for t in texts]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([r[0].size for r in rows])
    indices = np.concatenate([r[0] for r in rows]) if rows else np.empty(0, np.int64)
    data = np.concatenate([r[1] for r in rows]) if rows else np.empty(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), model.dimension))


def tfidf_to_dict(model: TfidfModel) -> dict:
    return {
        "terms": list(model.vocabulary),
        "document_frequency": model.document_frequency.tolist(),
        "n_documents": model.n_documents,
        "config": vars(model.config).copy(),
        "normalization": vars(model.normalization).copy(),
    }


def tfidf_from_dict(d: dict) -> TfidfModel:
    return TfidfModel(
        {t: i for i, t in enumerate(d["terms"])},
        np.array(d["document_frequency"], dtype=np.int64),
        int(d["n_documents"]),
        NgramConfig(**d["config"]),
        NormalizationConfig(**d["normalization"]),
    )


# -- embeddings -------------------------------------------------------------


@dataclass
class EmbeddingTable:
    dimension: int
    index: dict[str, int]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(len(self.index), self.dimension)

    @classmethod
    def from_dict(cls, vectors: dict[str, Sequence[float]], dimension: int | None = None) -> "EmbeddingTable":
        if dimension is None:
            if not vectors:
                raise ValueError("dimension required for an empty table")
            dimension = len(next(iter(vectors.values())))
        for term, vec in vectors.items():
            if len(vec) != dimension:
                raise DimensionMismatch(f"vector for {term!r} has length {len(vec)}, expected {dimension}")
        return cls(dimension, {t: i for i, t in enumerate(vectors)}, np.array(list(vectors.values()), dtype=np.float64))

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def vector(self, term: str) -> np.ndarray:
        try:
            return self.matrix[self.index[term]]
        except KeyError:
            raise MissingEmbedding(f"no embedding for {term!r}") from None


def load_embedding_table(path: str | Path) -> EmbeddingTable:
    lines = [line.rstrip("\r") for line in Path(path).read_text(encoding="utf-8-sig").split("\n")]
    if not lines:
        raise MalformedLine(f"{path}: missing '<count> <dim>' header")
    head = lines[0].split()
    try:
        count, dim = int(head[0]), int(head[1])
        if len(head) != 2 or dim < 1 or count < 0:
            raise ValueError
    except (ValueError, IndexError):
        raise MalformedLine(f"{path}:1: bad header {lines[0]!r}") from None
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip().split(" ")
        if not line.strip():
            continue
        term, values = parts[0], parts[1:]
        if len(values) != dim:
            raise DimensionMismatch(f"{path}:{lineno}: {len(values)} values, expected {dim}")
        try:
            vec = [float(v) for v in values]
        except ValueError:
            raise MalformedLine(f"{path}:{lineno}: non-numeric value") from None
        if term in index:
            warnings.warn(f"{path}:{lineno}: duplicate term {term!r}; keeping the last vector", stacklevel=2)
            rows[index[term]] = vec
        else:
            index[term] = len(rows)
            rows.append(vec)
    if len(rows) != count:
        warnings.warn(f"{path}: header announces {count} vectors, found {len(rows)}", stacklevel=2)
    return EmbeddingTable(dim, index, np.array(rows, dtype=np.float64).reshape(len(rows), dim))


def write_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dimension}\n")
        for term, i in table.index.items():
            fh.write(term + " " + " ".join(repr(float(v)) for v in table.matrix[i]) + "\n")


def embed_average(tokens: Sequence[str], table: EmbeddingTable) -> FeatureVector:
    rows = [table.index[t] for t in tokens if t in table.index]
    if not rows:
        return FeatureVector.zeros(table.dimension)
    # sorted rows: the mean must not depend on token order
    return FeatureVector.from_dense(table.matrix[sorted(rows)].mean(axis=0))


def lookup_sentence(example_id: str, table: EmbeddingTable) -> FeatureVector:
    if example_id not in table.index:
        raise MissingEmbedding(f"no sentence embedding for example id {example_id!r}")
    return FeatureVector.from_dense(table.matrix[table.index[example_id]])


# -- block concatenation ----------------------------------------------------


def concat_blocks(blocks: Sequence[FeatureVector]) -> FeatureVector:
    idx_parts, val_parts = [], []
    offset = 0
    for block in blocks:
        if block.indices.size:
            idx_parts.append(block.indices + offset)
            val_parts.append(_unit(block.values))
        offset += block.dimension
    if not idx_parts:
        return FeatureVector.zeros(offset)
    return FeatureVector(offset, np.concatenate(idx_parts), np.concatenate(val_parts))


def normalize_rows(X: sp.spmatrix) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64, copy=True)
    X.eliminate_zeros()
    X.sort_indices()
    for i in range(X.shape[0]):
        row = slice(X.indptr[i], X.indptr[i + 1])
        if X.indptr[i + 1] > X.indptr[i]:
            X.data[row] = _unit(X.data[row])
    return X


def concat_block_matrices(blocks: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    """Row-wise `concat_blocks` over whole matrices."""
    out = sp.hstack([normalize_rows(b) for b in blocks], format="csr")
    out.eliminate_zeros()
    out.sort_indices()
    return out
