"""Feature pipeline: a list of feature blocks fitted on a training set and applied to any dataset."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Dataset
from .errors import ConfigInvalid, MissingEmbedding
from .features import (
    EmbeddingTable,
    NgramConfig,
    NormalizationConfig,
    TfidfModel,
    concat_block_matrices,
    fit_tfidf,
    load_embedding_table,
    tfidf_from_dict,
    tfidf_to_dict,
    tokenize,
    transform_tfidf_many,
)

FEATURE_KINDS = ("word_unigram", "char_ngram", "word_embed", "sentence_embed")
TEXT_FEATURES = ("word_unigram", "char_ngram", "word_embed")


@dataclass(frozen=True)
class FeatureSpec:
    kind: str
    n_min: int | None = None
    n_max: int | None = None
    min_df: int = 1

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ConfigInvalid(f"unknown feature kind {self.kind!r}; expected one of {FEATURE_KINDS}")

    def ngram_config(self) -> NgramConfig:
        unit = "word" if self.kind == "word_unigram" else "char"
        return NgramConfig(unit, self.n_min, self.n_max, self.min_df)

    @classmethod
    def parse(cls, value: "str | dict | FeatureSpec") -> "FeatureSpec":
        if isinstance(value, FeatureSpec):
            return value
        if isinstance(value, str):
            return cls(value)
        return cls(**value)


@dataclass
class FeaturePipeline:
    specs: tuple[FeatureSpec, ...]
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    word_table: EmbeddingTable | None = None
    # role -> table keyed by example id ("default" is the fallback role)
    sentence_tables: dict[str, EmbeddingTable] = field(default_factory=dict)
    tfidf: dict[int, TfidfModel] = field(default_factory=dict)

    def __post_init__(self):
        self.specs = tuple(FeatureSpec.parse(s) for s in self.specs)
        if not self.specs:
            raise ConfigInvalid("at least one feature block is required")

    @property
    def fitted(self) -> bool:
        return all(i in self.tfidf for i, s in enumerate(self.specs) if s.kind in ("word_unigram", "char_ngram"))

    @property
    def text_only(self) -> bool:
        return all(s.kind in TEXT_FEATURES for s in self.specs)

    def block_dims(self) -> list[int]:
        dims = []
        for i, spec in enumerate(self.specs):
            if spec.kind in ("word_unigram", "char_ngram"):
                dims.append(self.tfidf[i].dimension)
            elif spec.kind == "word_embed":
                dims.append(self._word_table().dimension)
            else:
                tables = list(self.sentence_tables.values())
                if not tables:
                    raise ConfigInvalid("sentence_embed feature needs a sentence-embedding table")
                dims.append(tables[0].dimension)
        return dims

    @property
    def dimension(self) -> int:
        return sum(self.block_dims())

    def _word_table(self) -> EmbeddingTable:
        if self.word_table is None:
            raise ConfigInvalid("word_embed feature needs a word-embedding table")
        return self.word_table

    def _sentence_table(self, role: str) -> EmbeddingTable:
        table = self.sentence_tables.get(role) or self.sentence_tables.get("default")
        if table is None:
            raise ConfigInvalid(f"no sentence-embedding table for role {role!r}")
        return table

    def fit(self, texts: Sequence[str]) -> "FeaturePipeline":
        for i, spec in enumerate(self.specs):
            if spec.kind in ("word_unigram", "char_ngram"):
                self.tfidf[i] = fit_tfidf(texts, spec.ngram_config(), self.normalization)
        return self

    def transform_texts(self, texts: Sequence[str], ids: Sequence[str] | None = None, role: str = "target") -> sp.csr_matrix:
        blocks = []
        for i, spec in enumerate(self.specs):
            if spec.kind in ("word_unigram", "char_ngram"):
                blocks.append(transform_tfidf_many(self.tfidf[i], texts))
            elif spec.kind == "word_embed":
                blocks.append(sp.csr_matrix(self._embed_words(texts)))
            else:
                if ids is None:
                    raise ConfigInvalid("sentence_embed features need example ids")
                blocks.append(sp.csr_matrix(self._lookup(ids, role)))
        return concat_block_matrices(blocks)

    def transform(self, dataset: Dataset, role: str = "target") -> sp.csr_matrix:
        return self.transform_texts(dataset.texts, dataset.ids, role)

    def _embed_words(self, texts: Sequence[str]) -> np.ndarray:
        table = self._word_table()
        out = np.zeros((len(texts), table.dimension))
        for r, text in enumerate(texts):
            rows = sorted(table.index[t] for t in tokenize(text, self.normalization) if t in table.index)
            if rows:
                out[r] = table.matrix[rows].mean(axis=0)
        return out

    def _lookup(self, ids: Sequence[str], role: str) -> np.ndarray:
        table = self._sentence_table(role)
        missing = [i for i in ids if i not in table.index]
        if missing:
            raise MissingEmbedding(f"{len(missing)} example ids lack sentence embeddings for role {role!r}, e.g. {missing[:3]}")
        return table.matrix[[table.index[i] for i in ids]]

    def to_dict(self) -> dict:
        return {
            "specs": [asdict(s) for s in self.specs],
            "normalization": asdict(self.normalization),
            "tfidf": {str(i): tfidf_to_dict(m) for i, m in self.tfidf.items()},
        }

    @classmethod
    def from_dict(cls, d: dict, word_table: EmbeddingTable | None = None,
                  sentence_tables: dict[str, EmbeddingTable] | None = None) -> "FeaturePipeline":
        return cls(
            tuple(FeatureSpec(**s) for s in d["specs"]),
            NormalizationConfig(**d["normalization"]),
            word_table,
            dict(sentence_tables or {}),
            {int(i): tfidf_from_dict(m) for i, m in d["tfidf"].items()},
        )


def load_tables(word_path: str | Path | None, sentence_paths: dict[str, str] | None):
    word = load_embedding_table(word_path) if word_path else None
    cache: dict[str, EmbeddingTable] = {}
    sentence = {}
    for role, path in (sentence_paths or {}).items():
        key = str(Path(path).resolve())
        if key not in cache:
            cache[key] = load_embedding_table(path)
        sentence[role] = cache[key]
    return word, sentence
