"""`emoxling` command line: run / matrix / train / predict / evaluate / project / explain / compare."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import EMOTIONS, Dataset, Example, parse_dataset, parse_parallel, parse_predictions, serialize_dataset
from .corpus import serialize_predictions
from .errors import ConfigInvalid, EmoxlingError
from .experiment import (
    ExperimentConfig,
    RunManifest,
    fingerprint,
    load_system,
    report_text,
    run_experiment,
    run_matrix,
    save_system,
    train_system,
    verify_fingerprints,
    write_atomic,
)
from .explain import ComparisonReport, ExplainConfig, compare_models, explain
from .metrics import evaluate
from .projection import ProjectionConfig, filter_report, project_labels

log = logging.getLogger("emoxling")


def _manifest(command: str, args: argparse.Namespace, inputs: dict[str, str], started: float, **info) -> str:
    m = RunManifest(
        config={"command": command, **{k: v for k, v in vars(args).items() if k != "func"}},
        fingerprints={k: fingerprint(p) for k, p in inputs.items() if p},
        hyperparameters={},
        info=info,
        wall_clock_seconds=time.perf_counter() - started,
        seed=getattr(args, "seed", None) or 0,
    )
    return m.to_kv()


def _sentence_map(values: list[str] | None) -> dict[str, str] | None:
    if not values:
        return None
    out = {}
    for item in values:
        role, sep, path = item.partition("=")
        if not sep:
            role, path = "default", item
        out[role] = path
    return out


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    manifest = RunManifest.load(args.manifest) if args.manifest else None
    if manifest:
        d, base_dir = manifest.config, "."
    elif args.config:
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        base_dir = Path(args.config).parent
    else:
        d, base_dir = {}, "."
    d = dict(d)
    data = dict(d.get("data", {}))
    cwd_paths = {}
    for key in ("train", "dev", "test", "translated", "source_train", "parallel", "parallel_predictions", "word_embeddings"):
        val = getattr(args, key, None)
        if val:
            cwd_paths[key] = str(Path(val).resolve())
    data.update(cwd_paths)
    sent = _sentence_map(args.sentence_emb)
    if sent:
        data["sentence_embeddings"] = {r: str(Path(p).resolve()) for r, p in sent.items()}
    d["data"] = data
    if args.approach is not None:
        d["approach"] = args.approach
    if args.combined:
        d["combined_with_target"] = True
    for key in ("model", "language", "name"):
        if getattr(args, key, None):
            d[key] = getattr(args, key)
    if args.features:
        d["features"] = [f.strip() for f in args.features.split(",") if f.strip()]
    if args.seed is not None:
        d["seed"] = args.seed
    if args.C is not None:
        d.setdefault("svm", {})["C"] = args.C
    config = ExperimentConfig.from_dict(d, base_dir)
    if manifest:
        verify_fingerprints(config, manifest.fingerprints)
    return config


def cmd_run(args) -> int:
    config = _experiment_config(args)
    report, _ = run_experiment(config, args.out)
    print(report_text(config, report))
    return 0


def cmd_matrix(args) -> int:
    path = Path(args.config)
    matrix = json.loads(path.read_text(encoding="utf-8"))
    print(run_matrix(matrix, args.out, path.parent))
    return 0


def cmd_train(args) -> int:
    started = time.perf_counter()
    config = _experiment_config(args)
    system = train_system(config)
    out = Path(args.out)
    save_system(system, config, out / "model.npz")
    write_atomic(out / "manifest.kv", RunManifest(
        config=config.to_dict(),
        fingerprints={k: fingerprint(p) for k, p in config.data.files().items()},
        hyperparameters={},
        info={"training_parts": dict(system.training_parts), "feature_dim": system.feature_dim},
        wall_clock_seconds=time.perf_counter() - started,
        seed=config.seed,
    ).to_kv())
    print(f"model written to {out / 'model.npz'} ({system.feature_dim} features)")
    return 0


def cmd_predict(args) -> int:
    started = time.perf_counter()
    system = load_system(args.model, _sentence_map(args.sentence_emb), args.word_embeddings)
    if args.parallel:
        pairs = parse_parallel(args.parallel)
        side = "source_text" if args.side == "source" else "target_text"
        data = Dataset("", "test", tuple(Example(p.pair_id, getattr(p, side)) for p in pairs))
        source = args.parallel
    else:
        data = parse_dataset(args.input, False, split="test")
        source = args.input
    preds = system.predict_dataset(data, args.role)
    out = Path(args.out)
    write_atomic(out / "predictions.tsv", serialize_predictions(preds))
    write_atomic(out / "manifest.kv", _manifest("predict", args, {"input": source, "model": args.model}, started,
                                               n_examples=len(preds)))
    print(f"{len(preds)} predictions written to {out / 'predictions.tsv'}")
    return 0


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    preds = parse_predictions(args.pred)
    gold = parse_dataset(args.gold, True, split="test")
    report = evaluate(preds, gold)
    out = Path(args.out)
    write_atomic(out / "report.kv", report.to_kv())
    write_atomic(out / "report.txt", report.to_text() + "\n")
    write_atomic(out / "manifest.kv", _manifest("evaluate", args, {"pred": args.pred, "gold": args.gold}, started))
    print(report.to_text())
    return 0


def cmd_project(args) -> int:
    started = time.perf_counter()
    config = ProjectionConfig(args.min_emotions, args.comparison, args.threshold)
    pairs = parse_parallel(args.parallel)
    preds = parse_predictions(args.pred)
    projected = project_labels(pairs, preds, config, args.language or "")
    summary = filter_report(pairs, preds, config)
    out = Path(args.out)
    write_atomic(out / "projected.tsv", serialize_dataset(projected, with_labels=True))
    write_atomic(out / "filter_report.txt", summary.to_text())
    write_atomic(out / "manifest.kv", _manifest("project", args, {"parallel": args.parallel, "pred": args.pred},
                                               started, retained=summary.retained, total=summary.total))
    print(summary.to_text(), end="")
    return 0


def _explain_config(args) -> ExplainConfig:
    return ExplainConfig(args.n_variants, args.keep_probability, args.exhaustive_max, args.seed or 0)


def _text_predictor(path: str, args):
    system = load_system(path, _sentence_map(getattr(args, "sentence_emb", None)), getattr(args, "word_embeddings", None))
    if not system.pipeline.text_only:
        raise ConfigInvalid(f"{path}: models on precomputed sentence embeddings cannot score word-removal variants")
    return system.predict_texts


def cmd_explain(args) -> int:
    started = time.perf_counter()
    predictor = _text_predictor(args.model, args)
    config = _explain_config(args)
    if args.text:
        items = [("text", args.text)]
    else:
        data = parse_dataset(args.input, False, split="test")
        wanted = set(args.ids.split(",")) if args.ids else None
        items = [(ex.id, ex.text) for ex in data if wanted is None or ex.id in wanted]
    out = Path(args.out)
    records, lines = [], []
    for eid, text in items:
        att = explain(predictor, text, config, batched=True)
        top = {lab: [[w, s] for _, w, s in att.top(lab, args.top)] for lab in EMOTIONS}
        records.append({"id": eid, "text": text, "words": list(att.words),
                        "scores": att.scores.tolist(), "top": top, "n_variants": att.n_variants})
        lines.append(f"== {eid}: {text}")
        for lab, pairs in top.items():
            lines.append(f"  {lab:<12} " + " ".join(f"{w}:{s:.3f}" for w, s in pairs))
        lines.append("")
    write_atomic(out / "explain" / "attributions.json", json.dumps(records, ensure_ascii=False, indent=1) + "\n")
    write_atomic(out / "explain" / "attributions.txt", "\n".join(lines))
    write_atomic(out / "manifest.kv", _manifest("explain", args, {"model": args.model, "input": args.input}, started))
    print("\n".join(lines))
    return 0


def cmd_compare(args) -> int:
    started = time.perf_counter()
    preds_a = parse_predictions(args.pred_a)
    preds_b = parse_predictions(args.pred_b)
    gold = parse_dataset(args.gold, True, split="test")
    fn_a = _text_predictor(args.model_a, args)
    fn_b = _text_predictor(args.model_b, args)
    report: ComparisonReport = compare_models(
        preds_a, preds_b, gold, fn_a, fn_b, min(args.k, len(gold)), _explain_config(args),
        top_n=args.top, batched=True, names=(args.model_a, args.model_b), balanced=args.balanced,
    )
    out = Path(args.out)
    write_atomic(out / "explain" / "comparison.json", report.to_json())
    write_atomic(out / "explain" / "comparison.txt", report.to_text())
    inputs = {"pred_a": args.pred_a, "pred_b": args.pred_b, "gold": args.gold, "model_a": args.model_a, "model_b": args.model_b}
    write_atomic(out / "manifest.kv", _manifest("compare", args, inputs, started, selected=len(report.examples)))
    print(f"{len(report.examples)} examples written to {out / 'explain'}")
    return 0


def _add_experiment_flags(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="experiment config (JSON)")
    src.add_argument("--manifest", help="re-run from a manifest.kv written by an earlier run")
    p.add_argument("--train", help="target-language training set")
    p.add_argument("--dev", help="target-language dev set (mlp early stopping)")
    p.add_argument("--test", help="target-language test set")
    p.add_argument("--translated", help="translated training set (approach T)")
    p.add_argument("--source-train", dest="source_train", help="source-language training set (approach M)")
    p.add_argument("--parallel", help="parallel corpus TSV (approach P)")
    p.add_argument("--parallel-pred", dest="parallel_predictions", help="source-side predictions for the parallel corpus")
    p.add_argument("--word-emb", dest="word_embeddings", help="word embedding table")
    p.add_argument("--sentence-emb", action="append", metavar="[ROLE=]PATH",
                   help="sentence embeddings keyed by example id; roles: source, translated, projected, target, default")
    p.add_argument("--approach", help="comma-separated subset of M,T,P ('' for monolingual)")
    p.add_argument("--combined", action="store_true", help="also train on the target-language training set")
    p.add_argument("--model", choices=("svm", "mlp"))
    p.add_argument("--features", help="comma-separated: word_unigram,char_ngram,word_embed,sentence_embed")
    p.add_argument("--language")
    p.add_argument("--name")
    p.add_argument("--seed", type=int)
    p.add_argument("-C", dest="C", type=float, help="SVM regularization constant")
    p.add_argument("--out", required=out_required, help="run directory")


def _add_explain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-variants", type=int, default=1000)
    p.add_argument("--keep-probability", type=float, default=0.5)
    p.add_argument("--exhaustive-max", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--sentence-emb", action="append", metavar="[ROLE=]PATH")
    p.add_argument("--word-emb", dest="word_embeddings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoxling", description=__doc__)
    parser.add_argument("--version", action="version", version=f"emoxling {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train, predict and evaluate one experiment")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="run a matrix of experiments and tabulate them")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("train", help="train a model and save it with its feature pipeline")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a saved model to a dataset or one side of a parallel corpus")
    p.add_argument("--model", required=True, help="model.npz")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="dataset TSV (label columns ignored)")
    src.add_argument("--parallel", help="parallel corpus TSV")
    p.add_argument("--side", choices=("source", "target"), default="source")
    p.add_argument("--role", default="target", help="sentence-embedding role for the input")
    p.add_argument("--sentence-emb", action="append", metavar="[ROLE=]PATH")
    p.add_argument("--word-emb", dest="word_embeddings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a prediction file against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("project", help="transfer source-side predictions to the target side of a parallel corpus")
    p.add_argument("--parallel", required=True)
    p.add_argument("--pred", required=True, help="source-side predictions keyed by pair_id")
    p.add_argument("--min-emotions", type=int, default=3)
    p.add_argument("--comparison", choices=("at-least", "more-than"), default="at-least")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--language")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("explain", help="word attributions for a saved model")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--input")
    p.add_argument("--ids", help="comma-separated example ids to explain (default: all)")
    _add_explain_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("compare", help="explain the largest Jaccard disagreements between two models")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("-k", type=int, default=100)
    p.add_argument("--balanced", action="store_true", help="pick k/2 examples where each model is better")
    _add_explain_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EmoxlingError as err:
        print(f"emoxling {args.command}: error: {err}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as err:
        print(f"emoxling {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
