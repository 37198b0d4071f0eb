"""Experiment runner: assemble a training set per approach, fit features, train, evaluate, record a manifest."""

from __future__ import annotations

import contextlib
import copy
import dataclasses
import hashlib
import json
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from . import __version__
from .corpus import Dataset, PredictionMatrix, parse_dataset, parse_parallel, parse_predictions, serialize_predictions
from .errors import ConfigInvalid, EmoxlingError, StageError
from .features import NormalizationConfig
from .metrics import EvalReport, evaluate, pct, per_class_table
from .models import MlpConfig, MlpModel, MultiLabelLinearModel, SvmConfig, load_model, predict, predict_mlp, save_model
from .models import train_mlp, train_svm_ovr
from .pipeline import FeaturePipeline, FeatureSpec, load_tables
from .projection import ProjectionConfig, project_labels

APPROACHES = ("M", "T", "P")
# training-set role contributed by each approach
APPROACH_ROLES = {"M": "source", "T": "translated", "P": "projected"}
_PATH_KEYS = ("train", "dev", "test", "translated", "source_train", "parallel", "parallel_predictions", "word_embeddings")


@dataclass
class DataPaths:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    translated: str | None = None
    source_train: str | None = None
    parallel: str | None = None
    parallel_predictions: str | None = None
    word_embeddings: str | None = None
    # role -> table keyed by example id; roles: source, translated, projected, target, default
    sentence_embeddings: dict[str, str] = field(default_factory=dict)

    def resolved(self, base: Path) -> "DataPaths":
        def fix(p):
            return None if p is None else str((base / p).resolve()) if not os.path.isabs(p) else p

        out = DataPaths(**{k: fix(getattr(self, k)) for k in _PATH_KEYS})
        out.sentence_embeddings = {role: fix(p) for role, p in self.sentence_embeddings.items()}
        return out

    def files(self) -> dict[str, str]:
        out = {k: getattr(self, k) for k in _PATH_KEYS if getattr(self, k)}
        out.update({f"sentence_embeddings.{r}": p for r, p in sorted(self.sentence_embeddings.items())})
        return out


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    language: str = ""
    approach: tuple[str, ...] = ()
    combined_with_target: bool = False
    model: str = "svm"
    features: tuple[FeatureSpec, ...] = (FeatureSpec("char_ngram"),)
    data: DataPaths = field(default_factory=DataPaths)
    svm: SvmConfig = field(default_factory=SvmConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        try:
            approach = d.get("approach", ())
            if isinstance(approach, str):
                approach = [a for a in approach.replace("+", ",").split(",") if a.strip()]
            bad = {a.strip().upper() for a in approach} - set(APPROACHES)
            if bad:
                raise ConfigInvalid(f"unknown approach {sorted(bad)}; expected a subset of {APPROACHES}")
            data = dict(d.get("data", {}))
            sentence = data.pop("sentence_embeddings", {}) or {}
            if isinstance(sentence, str):
                sentence = {"default": sentence}
            svm = dict(d.get("svm", {}))
            if isinstance(svm.get("positive_weight"), list):
                svm["positive_weight"] = tuple(svm["positive_weight"])
            return cls(
                name=d.get("name", "experiment"),
                language=d.get("language", ""),
                approach=tuple(sorted({a.strip().upper() for a in approach})),
                combined_with_target=bool(d.get("combined_with_target", False)),
                model=d.get("model", "svm"),
                features=tuple(FeatureSpec.parse(f) for f in d.get("features", ["char_ngram"])),
                data=DataPaths(**data, sentence_embeddings=dict(sentence)).resolved(Path(base_dir)),
                svm=SvmConfig(**svm),
                mlp=MlpConfig(**d.get("mlp", {})),
                projection=ProjectionConfig(**d.get("projection", {})),
                normalization=NormalizationConfig(**d.get("normalization", {})),
                seed=int(d.get("seed", 0)),
            )
        except (TypeError, ValueError) as err:
            raise ConfigInvalid(str(err)) from err

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as err:
            raise ConfigInvalid(f"{path}: {err}") from err
        return cls.from_dict(d, path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["approach"] = list(self.approach)
        d["features"] = [asdict(f) for f in self.features]
        return d

    def validate(self, need_test: bool = True) -> None:
        bad = set(self.approach) - set(APPROACHES)
        if bad:
            raise ConfigInvalid(f"unknown approach {sorted(bad)}; expected a subset of {APPROACHES}")
        if not self.approach and not self.data.train:
            raise ConfigInvalid("no approach given and no target-language train path")
        if self.combined_with_target and not self.data.train:
            raise ConfigInvalid("combined_with_target needs a target-language train path")
        if "T" in self.approach and not self.data.translated:
            raise ConfigInvalid("approach T needs data.translated")
        if "P" in self.approach and not (self.data.parallel and self.data.parallel_predictions):
            raise ConfigInvalid("approach P needs data.parallel and data.parallel_predictions")
        if "M" in self.approach and not self.data.source_train:
            raise ConfigInvalid("approach M needs data.source_train")
        if need_test and not self.data.test:
            raise ConfigInvalid("data.test is required")
        if self.model not in ("svm", "mlp"):
            raise ConfigInvalid(f"model must be svm or mlp, got {self.model!r}")
        kinds = [f.kind for f in self.features]
        if not kinds:
            raise ConfigInvalid("at least one feature is required")
        if self.model == "mlp":
            if kinds != ["sentence_embed"]:
                raise ConfigInvalid("the mlp model takes dense sentence_embed input only")
            if not self.data.dev:
                raise ConfigInvalid("the mlp model needs data.dev for early stopping")
        if "M" in self.approach and set(kinds) != {"sentence_embed"}:
            raise ConfigInvalid("approach M trains on source-language text and needs multilingual sentence_embed features only")
        if "word_embed" in kinds and not self.data.word_embeddings:
            raise ConfigInvalid("word_embed needs data.word_embeddings")
        if "sentence_embed" in kinds and not self.data.sentence_embeddings:
            raise ConfigInvalid("sentence_embed needs data.sentence_embeddings")
        for key, path in self.data.files().items():
            if not Path(path).is_file():
                raise ConfigInvalid(f"data.{key}: no such file {path}")


@dataclass
class RunManifest:
    config: dict
    fingerprints: dict[str, str]
    hyperparameters: dict[str, object]
    info: dict[str, object] = field(default_factory=dict)
    toolkit_version: str = __version__
    wall_clock_seconds: float = 0.0
    seed: int = 0

    def to_kv(self) -> str:
        lines = [
            f"toolkit_version={self.toolkit_version}",
            f"seed={self.seed}",
            f"wall_clock_seconds={self.wall_clock_seconds:.3f}",
            "config=" + json.dumps(self.config, sort_keys=True, ensure_ascii=False),
        ]
        lines += [f"fingerprint.{k}={v}" for k, v in sorted(self.fingerprints.items())]
        lines += [f"hyper.{k}={json.dumps(v)}" for k, v in sorted(self.hyperparameters.items())]
        lines += [f"info.{k}={json.dumps(v, ensure_ascii=False)}" for k, v in sorted(self.info.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "RunManifest":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(
            config=json.loads(kv["config"]),
            fingerprints={k[len("fingerprint."):]: v for k, v in kv.items() if k.startswith("fingerprint.")},
            hyperparameters={k[len("hyper."):]: json.loads(v) for k, v in kv.items() if k.startswith("hyper.")},
            info={k[len("info."):]: json.loads(v) for k, v in kv.items() if k.startswith("info.")},
            toolkit_version=kv.get("toolkit_version", ""),
            wall_clock_seconds=float(kv.get("wall_clock_seconds", 0.0)),
            seed=int(kv.get("seed", 0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        return cls.from_kv(Path(path).read_text(encoding="utf-8"))


def fingerprint(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def verify_fingerprints(config: ExperimentConfig, fingerprints: dict[str, str]) -> None:
    for key, path in config.data.files().items():
        want = fingerprints.get(key)
        if want and Path(path).is_file() and fingerprint(path) != want:
            raise ConfigInvalid(f"data.{key} ({path}) changed since the manifest was written")


def config_from_manifest(manifest: RunManifest, verify: bool = True) -> ExperimentConfig:
    config = ExperimentConfig.from_dict(manifest.config)
    if verify:
        verify_fingerprints(config, manifest.fingerprints)
    return config


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except (EmoxlingError, OSError, ValueError) as err:
        raise StageError(name, err) from err


# -- training ---------------------------------------------------------------


@dataclass
class TrainedSystem:
    model: MultiLabelLinearModel | MlpModel
    pipeline: FeaturePipeline
    training_parts: list[tuple[str, int]]
    feature_dim: int

    def predict_dataset(self, dataset: Dataset, role: str = "target") -> PredictionMatrix:
        X = self.pipeline.transform(dataset, role)
        return self._predict(X, dataset.ids)

    def predict_texts(self, texts: Sequence[str]) -> np.ndarray:
        """Batched text -> probabilities; only for pipelines built from text features."""
        X = self.pipeline.transform_texts(list(texts))
        return self._predict(X, None).probabilities

    def _predict(self, X: sp.csr_matrix, ids) -> PredictionMatrix:
        if isinstance(self.model, MlpModel):
            return predict_mlp(self.model, X.toarray(), ids)
        return predict(self.model, X, ids)


def training_parts(config: ExperimentConfig) -> list[tuple[str, Dataset]]:
    parts = []
    lang = config.language
    if "M" in config.approach:
        parts.append(("source", parse_dataset(config.data.source_train, True, "source", "train")))
    if "T" in config.approach:
        parts.append(("translated", parse_dataset(config.data.translated, True, lang, "translated")))
    if "P" in config.approach:
        pairs = parse_parallel(config.data.parallel)
        preds = parse_predictions(config.data.parallel_predictions)
        parts.append(("projected", project_labels(pairs, preds, config.projection, lang)))
    if not config.approach or config.combined_with_target:
        parts.append(("target", parse_dataset(config.data.train, True, lang, "train")))
    return parts


def train_system(config: ExperimentConfig) -> TrainedSystem:
    config.validate(need_test=False)
    with stage("load"):
        parts = training_parts(config)
        word, sentence = load_tables(config.data.word_embeddings, config.data.sentence_embeddings)
    n_train = sum(len(ds) for _, ds in parts)
    if n_train == 0:
        raise StageError("load", ConfigInvalid("the assembled training set is empty"))
    with stage("features"):
        pipeline = FeaturePipeline(config.features, config.normalization, word, sentence)
        # tf-idf statistics come from exactly the concatenated training set
        pipeline.fit([t for _, ds in parts for t in ds.texts])
        X = sp.vstack([pipeline.transform(ds, role) for role, ds in parts], format="csr")
        Y = np.vstack([ds.label_matrix() for _, ds in parts])
    with stage("train"):
        if config.model == "svm":
            model = train_svm_ovr(X, Y, dataclasses.replace(config.svm, seed=config.seed))
        else:
            dev = parse_dataset(config.data.dev, True, config.language, "dev")
            Xv = pipeline.transform(dev, "target").toarray()
            mlp_cfg = dataclasses.replace(config.mlp, input_dim=X.shape[1], seed=config.seed)
            model = train_mlp(X.toarray(), Y, (Xv, dev.label_matrix()), mlp_cfg)
    return TrainedSystem(model, pipeline, [(role, len(ds)) for role, ds in parts], X.shape[1])


def hyperparameters(config: ExperimentConfig, system: TrainedSystem) -> dict[str, object]:
    model = system.model
    if isinstance(model, MlpModel):
        hp = {f"mlp.{k}": v for k, v in asdict(model.config).items()}
        hp["mlp.best_epoch"] = model.best_epoch
        hp["mlp.epochs_run"] = len(model.history["val_loss"])
    else:
        hp = {f"svm.{k}": v for k, v in asdict(model.config).items()}
        hp["svm.sigmoid_scale"] = model.sigmoid_scale
        hp["svm.sweeps"] = [t.sweeps for t in model.traces]
        hp["svm.converged"] = [t.converged for t in model.traces]
    hp["decision_threshold"] = 0.5
    for k, v in asdict(config.projection).items():
        hp[f"projection.{k}"] = v
    return hp


# -- output -----------------------------------------------------------------


def write_atomic(path: Path, content: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def save_system(system: TrainedSystem, config: ExperimentConfig, path: Path) -> None:
    extra = {
        "pipeline": system.pipeline.to_dict(),
        "word_embeddings": config.data.word_embeddings,
        "sentence_embeddings": config.data.sentence_embeddings,
        "feature_dim": system.feature_dim,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        save_model(system.model, tmp, extra)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def load_system(path: str | Path, sentence_embeddings: dict[str, str] | None = None,
                word_embeddings: str | None = None) -> TrainedSystem:
    model, extra = load_model(path)
    word, sentence = load_tables(
        word_embeddings or extra.get("word_embeddings"),
        sentence_embeddings if sentence_embeddings is not None else extra.get("sentence_embeddings"),
    )
    pipeline = FeaturePipeline.from_dict(extra["pipeline"], word, sentence)
    return TrainedSystem(model, pipeline, [], int(extra["feature_dim"]))


def report_text(config: ExperimentConfig, report: EvalReport) -> str:
    head = [
        f"experiment: {config.name}",
        f"language: {config.language or '-'}",
        f"approach: {'+'.join(config.approach) or 'monolingual'}{' (combined with target)' if config.combined_with_target else ''}",
        f"model: {config.model}",
        f"features: {'+'.join(f.kind for f in config.features)}",
        "",
    ]
    return "\n".join(head) + report.to_text() + "\n"


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> tuple[EvalReport, RunManifest]:
    started = time.perf_counter()
    config.validate(need_test=True)
    system = train_system(config)
    with stage("evaluate"):
        test = parse_dataset(config.data.test, True, config.language, "test")
        preds = system.predict_dataset(test, "target")
        report = evaluate(preds, test)
    manifest = RunManifest(
        config=config.to_dict(),
        fingerprints={k: fingerprint(p) for k, p in config.data.files().items()},
        hyperparameters=hyperparameters(config, system),
        info={
            "training_parts": dict(system.training_parts),
            "training_size": sum(n for _, n in system.training_parts),
            "feature_dim": system.feature_dim,
            "test_size": len(test),
            "tfidf_fit": "concatenated training set of this run",
            "dev_usage": "mlp early stopping only" if config.model == "mlp" else "unused",
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        seed=config.seed,
    )
    manifest.wall_clock_seconds = time.perf_counter() - started
    if out_dir is not None:
        out = Path(out_dir)
        with stage("write"):
            save_system(system, config, out / "model.npz")
            write_atomic(out / "predictions.tsv", serialize_predictions(preds))
            write_atomic(out / "report.kv", report.to_kv())
            write_atomic(out / "report.txt", report_text(config, report))
            write_atomic(out / "manifest.kv", manifest.to_kv())
    return report, manifest


# -- result tables ----------------------------------------------------------


def _best_marks(values: list[float | None]) -> list[bool]:
    shown = [None if v is None else round(100.0 * v, 1) for v in values]
    present = [v for v in shown if v is not None]
    if not present:
        return [False] * len(values)
    top = max(present)
    return [v is not None and v == top for v in shown]


def _cells(values: list[float | None]) -> list[str]:
    marks = _best_marks(values)
    return ["-" if v is None else pct(v) + ("*" if m else "") for v, m in zip(values, marks)]


def emit_result_table(reports: Sequence[tuple[str, EvalReport]]) -> str:
    """Aligned J/F/A table in percent; '*' marks the best value per column (ties share it)."""
    if not reports:
        raise ValueError("no rows to tabulate")
    return _table([label for label, _ in reports], [("J", "F", "A")], [[r] for _, r in reports])


def emit_matrix_table(rows: Sequence[tuple[str, EvalReport | None, EvalReport | None]]) -> str:
    """Two column groups per row: training on source-derived data only, and combined with target data."""
    if not rows:
        raise ValueError("no rows to tabulate")
    return _table(
        [label for label, _, _ in rows],
        [("J", "F", "A"), ("J", "F", "A")],
        [[cross, comb] for _, cross, comb in rows],
        group_names=("cross-lingual", "combined"),
    )


def _table(labels, groups, reports, group_names=None) -> str:
    columns: list[list[str]] = []
    for g, names in enumerate(groups):
        for attr in ("jaccard", "macro_f1", "avg_accuracy"):
            values = [None if r[g] is None else getattr(r[g], attr) for r in reports]
            columns.append(_cells(values))
    headers = [n for names in groups for n in names]
    label_w = max(len("Row"), *(len(s) for s in labels))
    widths = [max(len(h), *(len(c) for c in col)) for h, col in zip(headers, columns)]
    lines = []
    if group_names:
        parts = []
        for g, name in enumerate(group_names):
            w = sum(widths[3 * g:3 * g + 3]) + 2 * 2
            parts.append(name.center(w))
        lines.append(" " * label_w + " | " + " | ".join(parts))
    head = "Row".ljust(label_w)
    sep = "-" * label_w
    for g in range(len(groups)):
        ws = widths[3 * g:3 * g + 3]
        hs = headers[3 * g:3 * g + 3]
        head += " | " + "  ".join(h.rjust(w) for h, w in zip(hs, ws))
        sep += "-+-" + "--".join("-" * w for w in ws)
    lines += [head, sep]
    for i, label in enumerate(labels):
        line = label.ljust(label_w)
        for g in range(len(groups)):
            ws = widths[3 * g:3 * g + 3]
            cs = [columns[3 * g + j][i] for j in range(3)]
            line += " | " + "  ".join(c.rjust(w) for c, w in zip(cs, ws))
        lines.append(line)
    return "\n".join(lines) + "\n"


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def run_matrix(matrix: dict, out_dir: str | Path, base_dir: str | Path = ".") -> str:
    """Run every row of an experiment matrix, cross-lingual and (optionally) combined.

    `matrix` = {"base": {...config...}, "combined": bool, "rows": [{"label": str, ...overrides}]}
    """
    out = Path(out_dir)
    base = matrix.get("base", {})
    table_rows = []
    kv_lines = []
    for i, row in enumerate(matrix.get("rows", [])):
        row = dict(row)
        label = row.pop("label", f"row{i}")
        merged = _deep_merge(base, row)
        merged.setdefault("name", label)
        results = []
        variants = [("cross", False)] + ([("combined", True)] if matrix.get("combined", False) else [])
        for tag, combined in variants:
            cfg = ExperimentConfig.from_dict(dict(merged, combined_with_target=combined), base_dir)
            report, _ = run_experiment(cfg, out / f"{i:02d}" / tag)
            results.append(report)
            kv_lines.append(f"{i:02d}.{tag}.label={label}")
            kv_lines += [f"{i:02d}.{tag}.{line}" for line in report.to_kv().splitlines()]
        table_rows.append((label, results[0], results[1] if len(results) > 1 else None))
    if matrix.get("combined", False):
        table = emit_matrix_table(table_rows)
    else:
        table = emit_result_table([(label, r) for label, r, _ in table_rows])
    table += "\n" + per_class_table([(label, r) for label, r, _ in table_rows]) + "\n"
    write_atomic(out / "table.txt", table)
    write_atomic(out / "table.kv", "\n".join(kv_lines) + "\n")
    return table
