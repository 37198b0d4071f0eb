"""Synthetic bilingual emotion data for tests, demos and smoke runs.

A tiny "source" language and a "target" language share one lexicon: every
emotion owns a few cue words, each source word has a fixed target-language
counterpart, and texts are shuffled bags of cue and filler words. Sentence
embeddings are language-independent (label prototypes plus noise), which
makes them behave like multilingual sentence encoders.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import EMOTIONS, N_LABELS, Dataset, Example, LabelVector, ParallelPair, PredictionMatrix
from .corpus import serialize_parallel, write_dataset, write_predictions
from .features import EmbeddingTable, write_embedding_table

_SYLLABLES = ["ka", "lu", "mi", "so", "ra", "te", "no", "vi", "da", "be", "zu", "ho", "pe", "ti", "ga", "fo"]


def _make_word(rng: np.random.Generator, n_syll: int) -> str:
    return "".join(rng.choice(_SYLLABLES, size=n_syll))


class Lexicon:
    def __init__(self, seed: int = 0, cues_per_label: int = 5, n_filler: int = 40):
        rng = np.random.default_rng(seed)
        self.cues = {lab: [f"{lab[:4]}{j}" for j in range(cues_per_label)] for lab in EMOTIONS}
        self.filler = [f"w{j}" for j in range(n_filler)]
        vocab = [w for ws in self.cues.values() for w in ws] + self.filler
        seen: set[str] = set()
        self.translation = {}
        for w in vocab:
            t = _make_word(rng, 3)
            while t in seen:
                t = _make_word(rng, 3)
            seen.add(t)
            self.translation[w] = t

    def translate(self, words: list[str], rng: np.random.Generator | None = None, drop: float = 0.0) -> list[str]:
        out = [self.translation[w] for w in words]
        if rng is not None and drop > 0:
            kept = [w for w in out if rng.random() >= drop]
            out = kept or out[:1]
        return out


def sample_labels(rng: np.random.Generator, max_labels: int = 3) -> np.ndarray:
    k = int(rng.integers(1, max_labels + 1))
    bits = np.zeros(N_LABELS, dtype=bool)
    bits[rng.choice(N_LABELS, size=k, replace=False)] = True
    return bits


def sample_words(rng: np.random.Generator, lex: Lexicon, bits: np.ndarray) -> list[str]:
    words = []
    for k in np.flatnonzero(bits):
        n = int(rng.integers(1, 3))
        words += list(rng.choice(lex.cues[EMOTIONS[k]], size=n))
    words += list(rng.choice(lex.filler, size=int(rng.integers(2, 6))))
    rng.shuffle(words)
    return [str(w) for w in words]


def make_dataset(rng, lex, n, prefix, language, split, target_language=True, drop=0.0, max_labels=3):
    examples = []
    for i in range(n):
        bits = sample_labels(rng, max_labels)
        words = sample_words(rng, lex, bits)
        if target_language:
            words = lex.translate(words, rng, drop)
        examples.append(Example(f"{prefix}-{i:04d}", " ".join(words), LabelVector.from_array(bits)))
    return Dataset(language, split, tuple(examples))


def sentence_table(datasets, dim: int = 24, seed: int = 0, noise: float = 0.6, noise_seed: int = 0) -> EmbeddingTable:
    # shared prototypes across tables: one embedding space for every language
    prototypes = np.random.default_rng([seed, 7]).normal(size=(N_LABELS, dim))
    rng = np.random.default_rng([seed, 8, noise_seed])
    vectors = {}
    for ds in datasets:
        for ex in ds:
            bits = np.array(ex.labels.bits, dtype=float) if ex.labels is not None else np.zeros(N_LABELS)
            vectors[ex.id] = bits @ prototypes + noise * rng.normal(size=dim)
    return EmbeddingTable.from_dict(vectors, dim)


def word_table(lex: Lexicon, dim: int = 16, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng([seed, 11])
    prototypes = rng.normal(size=(N_LABELS + 1, dim))
    vectors = {}
    for k, lab in enumerate(EMOTIONS):
        for w in lex.cues[lab]:
            vectors[lex.translation[w]] = prototypes[k] + 0.3 * rng.normal(size=dim)
    for w in lex.filler:
        vectors[lex.translation[w]] = prototypes[-1] + 0.3 * rng.normal(size=dim)
    return EmbeddingTable.from_dict(vectors, dim)


def write_fixture(
    out_dir: str | Path,
    seed: int = 0,
    n_train: int = 200,
    n_dev: int = 60,
    n_test: int = 100,
    n_source: int = 200,
    n_pairs: int = 300,
    translation_drop: float = 0.15,
) -> dict[str, str]:
    """Write a complete bilingual fixture; returns the file paths by role."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    lex = Lexicon(seed)
    lang = "xx"

    train = make_dataset(rng, lex, n_train, "xx-train", lang, "train")
    dev = make_dataset(rng, lex, n_dev, "xx-dev", lang, "dev")
    test = make_dataset(rng, lex, n_test, "xx-test", lang, "test")

    source_examples, translated_examples = [], []
    for i in range(n_source):
        bits = sample_labels(rng)
        words = sample_words(rng, lex, bits)
        labels = LabelVector.from_array(bits)
        source_examples.append(Example(f"en-{i:04d}", " ".join(words), labels))
        translated_examples.append(
            Example(f"en-{i:04d}", " ".join(lex.translate(words, rng, translation_drop)), labels))
    source = Dataset("en", "train", tuple(source_examples))
    translated = Dataset(lang, "translated", tuple(translated_examples))

    pairs, probs, pair_truth = [], [], []
    for i in range(n_pairs):
        bits = sample_labels(rng, max_labels=6)
        words = sample_words(rng, lex, bits)
        pid = f"pair-{i:05d}"
        pairs.append(ParallelPair(pid, " ".join(words), " ".join(lex.translate(words))))
        p = np.where(bits, rng.uniform(0.55, 0.98, N_LABELS), rng.uniform(0.01, 0.45, N_LABELS))
        # a tagger that sometimes misses or invents an emotion
        flip = rng.random(N_LABELS) < 0.05
        p[flip] = 1.0 - p[flip]
        probs.append(p)
        pair_truth.append(Example(pid, pairs[-1].target_text, LabelVector.from_array(bits)))
    pair_preds = PredictionMatrix(tuple(p.pair_id for p in pairs), np.array(probs))
    pair_ds = Dataset(lang, "projected", tuple(pair_truth))

    paths = {
        "train": out / "train.tsv",
        "dev": out / "dev.tsv",
        "test": out / "test.tsv",
        "source_train": out / "source_train.tsv",
        "translated": out / "translated.tsv",
        "parallel": out / "parallel.tsv",
        "parallel_predictions": out / "parallel_predictions.tsv",
        "word_embeddings": out / "word_embeddings.txt",
        "sentence_target": out / "sent_target.txt",
        "sentence_source": out / "sent_source.txt",
        "sentence_translated": out / "sent_translated.txt",
        "sentence_projected": out / "sent_projected.txt",
    }
    write_dataset(train, paths["train"])
    write_dataset(dev, paths["dev"])
    write_dataset(test, paths["test"])
    write_dataset(source, paths["source_train"])
    write_dataset(translated, paths["translated"])
    paths["parallel"].write_text(serialize_parallel(pairs), encoding="utf-8")
    write_predictions(pair_preds, paths["parallel_predictions"])
    write_embedding_table(word_table(lex, seed=seed), paths["word_embeddings"])
    write_embedding_table(sentence_table([train, dev, test], seed=seed), paths["sentence_target"])
    write_embedding_table(sentence_table([source], seed=seed, noise_seed=1), paths["sentence_source"])
    write_embedding_table(sentence_table([translated], seed=seed, noise_seed=2), paths["sentence_translated"])
    write_embedding_table(sentence_table([pair_ds], seed=seed, noise_seed=3), paths["sentence_projected"])

    config = {
        "name": "xx-monolingual-char",
        "language": lang,
        "model": "svm",
        "features": ["char_ngram"],
        "data": {k: paths[k].name for k in ("train", "dev", "test", "translated", "source_train", "parallel",
                                            "parallel_predictions", "word_embeddings")}
        | {"sentence_embeddings": {"target": paths["sentence_target"].name,
                                   "source": paths["sentence_source"].name,
                                   "translated": paths["sentence_translated"].name,
                                   "projected": paths["sentence_projected"].name}},
        "seed": seed,
    }
    (out / "experiment.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    paths["config"] = out / "experiment.json"
    return {k: str(v) for k, v in paths.items()}
