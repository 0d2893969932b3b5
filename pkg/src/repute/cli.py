"""``repute`` command-line interface.

Commands: ``train``, ``classify``, ``reputation``, ``sweep`` and ``report``.
Failures print one JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import CASCADE_FUSION, FINE_GRAINED, PIPELINES, RELEVANT_KEYS, PipelineConfig, load_config
from .corpus import (
    PreprocessOptions,
    load_dataset,
    load_labeled_corpus,
    load_sst5,
    preprocess,
    tokenize_reviews,
    write_dataset,
)
from .evaluation import load_ground_truth, t0_sweep, write_sweep_table
from .features import load_external_vectors
from .pipelines import Models, prepare_cascade, review_breakdowns, run_pipeline
from .report import (
    ReputationReport,
    emit_pie_svg,
    emit_structured,
    emit_text_summary,
    generation_timestamp,
    load_structured,
)
from .sentiment import (
    FINE_LABELS,
    NEGATIVE,
    POLARITY_LABELS,
    POSITIVE,
    evaluate_classifier,
    load_external_probabilities,
    load_model,
    save_model,
    train_nb,
    train_svm_on_docs,
)

log = logging.getLogger("repute")

MODEL_FILES = {"nb_model": "nb.json", "svm_model": "svm.json", "fine_model": "fine.json"}

_POLARITY_ALIASES = {
    "positive": POSITIVE, "pos": POSITIVE, "1": POSITIVE,
    "negative": NEGATIVE, "neg": NEGATIVE, "0": NEGATIVE,
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", f"{self.prog}: {message}", code=2)


def _fail(kind: str, message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": kind, "message": " ".join(str(message).split())}) + "\n")
    sys.exit(code)


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, out_help: str):
    p.add_argument("--config", help="config file (falls back to $REPUTE_CONFIG)")
    p.add_argument("--pipeline", choices=PIPELINES)
    p.add_argument("--t0", type=float, help="opinion fusion threshold in [0, 1]")
    p.add_argument("--scale-max", type=int, choices=(5, 10))
    p.add_argument("--current-year", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--out", default=None, help=out_help)
    p.add_argument("--model-dir", help="directory holding nb.json / svm.json / fine.json")
    p.add_argument("--nb-model")
    p.add_argument("--svm-model")
    p.add_argument("--fine-model")
    p.add_argument("--probabilities", help="precomputed polarity posteriors: review_id p_negative p_positive")
    p.add_argument("--vectors", help="precomputed review vectors: review_id c1 c2 ...")
    p.add_argument("--lsa-rank", type=int)
    p.add_argument("--linkage", choices=("member", "seed"))
    p.add_argument("--floor-h", type=float)
    p.add_argument("--weights", help="three comma-separated weights for helpfulness, time, credibility")
    p.add_argument("--seed", type=int)
    p.add_argument("--entity-id", help="entity id (default: dataset file stem)")
    p.add_argument("--entity-name")


_OVERRIDE_KEYS = (
    "pipeline", "t0", "scale_max", "current_year", "top_k", "nb_model", "svm_model", "fine_model",
    "probabilities", "vectors", "lsa_rank", "linkage", "floor_h", "weights", "seed", "entity_name",
)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repute", description="Review-based reputation generation.")
    parser.add_argument("--version", action="version", version=f"repute {__version__}")
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train the classifiers a pipeline needs")
    _common(p, "output directory for model files (default: .)")
    p.add_argument("corpus", help="labelled review file, or an SST-5 directory with --format sst5")
    p.add_argument("--format", choices=("reviews", "sst5"), default="reviews")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction held out for evaluation (sst5 uses its test split instead)")
    p.add_argument("--evaluate", action="store_true", help="print metrics on the held-out data")

    p = sub.add_parser("classify", help="append predicted labels and posteriors to a dataset copy")
    _common(p, "output dataset file (default: <stem>.classified.csv)")
    p.add_argument("dataset")

    p = sub.add_parser("reputation", help="compute reputation and write the report files")
    _common(p, "output directory (default: .)")
    p.add_argument("dataset")
    p.add_argument("--timestamp", help="generation timestamp recorded in the report")

    p = sub.add_parser("sweep", help="threshold sweep against ground truth")
    _common(p, "output directory (default: .)")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--ground-truth", required=False, help="CSV with entity_id,ground_truth")
    p.add_argument("--grid", help="comma-separated thresholds (default 0.05..0.95 step 0.05)")

    p = sub.add_parser("report", help="re-render the text summary and SVG of a structured report")
    p.add_argument("report_json")
    p.add_argument("--out", default=None, help="output directory (default: next to the report)")
    p.add_argument("--top-k", type=int)
    return parser


def _effective_config(args, command: str) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    cfg = load_config(args.config, overrides)
    model_dir = getattr(args, "model_dir", None)
    if model_dir and command != "train":
        found = {}
        for key, name in MODEL_FILES.items():
            candidate = Path(model_dir) / name
            if key in RELEVANT_KEYS[cfg.pipeline] and getattr(cfg, key) is None and candidate.exists():
                found[key] = str(candidate)
        cfg = replace(cfg, **found)
    log.info("effective config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    return cfg


def _load_models(cfg: PipelineConfig) -> Models:
    models = Models()
    if cfg.probabilities:
        models.polarity = load_external_probabilities(cfg.probabilities, POLARITY_LABELS)
    elif cfg.nb_model:
        models.polarity = load_model(cfg.nb_model)
    if cfg.svm_model:
        models.svm = load_model(cfg.svm_model)
    if cfg.fine_model:
        models.fine = load_model(cfg.fine_model)
    if cfg.vectors:
        models.vectors = load_external_vectors(cfg.vectors)
    return models


def _dataset(path: str, cfg: PipelineConfig, entity_id: Optional[str] = None):
    return load_dataset(path, scale_max=cfg.scale_max, current_year=cfg.current_year, entity_id=entity_id)


def _opts(cfg: PipelineConfig) -> PreprocessOptions:
    return PreprocessOptions(remove_stopwords=cfg.remove_stopwords, stem=cfg.stem)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _normalize_label(label: str, fine: bool) -> str:
    key = label.strip().lower().replace(" ", "_").replace("-", "_")
    if fine:
        if key in FINE_LABELS:
            return key
        if key.isdigit() and int(key) < len(FINE_LABELS):
            return FINE_LABELS[int(key)]
    elif key in _POLARITY_ALIASES:
        return _POLARITY_ALIASES[key]
    expected = FINE_LABELS if fine else POLARITY_LABELS
    raise CliError(f"label {label!r} is not one of {', '.join(expected)}")


def _split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= fraction < 1.0:
        raise CliError("--holdout must lie in [0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(n * fraction))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def cmd_train(args) -> int:
    cfg = _effective_config(args, "train")
    fine = cfg.pipeline == FINE_GRAINED
    if args.format == "sst5":
        if not fine:
            raise CliError("--format sst5 trains the five-class model; use --pipeline fine-grained")
        train_pairs = load_sst5(args.corpus, "train")
        test_pairs = load_sst5(args.corpus, "test") if args.evaluate else []
    else:
        pairs = [(t, _normalize_label(l, fine)) for t, l in load_labeled_corpus(args.corpus)]
        train_idx, test_idx = _split(len(pairs), args.holdout, cfg.seed)
        train_pairs = [pairs[i] for i in train_idx]
        test_pairs = [pairs[i] for i in test_idx]
    opts = _opts(cfg)
    docs = [preprocess(t, opts, review_id=str(i)) for i, (t, _) in enumerate(train_pairs)]
    labels = [l for _, l in train_pairs]
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    label_set = FINE_LABELS if fine else POLARITY_LABELS
    nb = train_nb(docs, labels, ngram=cfg.ngram, min_df=cfg.min_df, alpha=cfg.nb_alpha, label_set=label_set)
    written = {}
    nb_path = out / (MODEL_FILES["fine_model"] if fine else MODEL_FILES["nb_model"])
    save_model(nb, nb_path)
    written["fine_model" if fine else "nb_model"] = str(nb_path)
    svm = None
    if cfg.pipeline == CASCADE_FUSION:
        svm = train_svm_on_docs(docs, labels, lam=cfg.svm_lam, epochs=cfg.svm_epochs, seed=cfg.seed,
                                ngram=cfg.ngram, min_df=cfg.min_df)
        svm_path = out / MODEL_FILES["svm_model"]
        save_model(svm, svm_path)
        written["svm_model"] = str(svm_path)
    summary = {"models": written, "train_size": len(docs)}
    if args.evaluate and test_pairs:
        test_docs = [preprocess(t, opts, review_id=str(i)) for i, (t, _) in enumerate(test_pairs)]
        gold = [l for _, l in test_pairs]
        metrics = evaluate_classifier([p.label for p in nb.predict_many(test_docs)], gold, label_set)
        print(metrics.format())
        summary["test_size"] = len(test_docs)
        summary["nb_accuracy"] = metrics.accuracy
        if svm is not None:
            svm_metrics = evaluate_classifier(svm.predict_labels(test_docs), gold, label_set)
            summary["svm_accuracy"] = svm_metrics.accuracy
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_classify(args) -> int:
    cfg = _effective_config(args, "classify")
    ds = _dataset(args.dataset, cfg, args.entity_id)
    models = _load_models(cfg)
    extra = []
    if cfg.pipeline == CASCADE_FUSION:
        state = prepare_cascade(ds, cfg, models)
        docs = tokenize_reviews(ds.reviews, _opts(cfg))
        preds = models.polarity.predict_many(docs) if hasattr(models.polarity, "predict_many") \
            else [models.polarity.predict(d) for d in docs]
        for label, stage, pred in zip(state.polarity, state.stage, preds):
            row = {"predicted_label": label, "cascade_stage": stage}
            row.update({f"p_{l}": repr(p) for l, p in zip(pred.labels, pred.probabilities)})
            extra.append(row)
    elif cfg.pipeline == FINE_GRAINED:
        if models.fine is None:
            run_pipeline(ds, cfg, models)  # raises the actionable missing-model error
        docs = tokenize_reviews(ds.reviews, _opts(cfg))
        for pred in models.fine.predict_many(docs):
            row = {"predicted_label": pred.label}
            row.update({f"p_{l}": repr(p) for l, p in zip(pred.labels, pred.probabilities)})
            extra.append(row)
    else:
        breakdowns, labels = review_breakdowns(ds, cfg, models)
        for b, label in zip(breakdowns, labels):
            row = {"predicted_label": label, "H": repr(b.H), "T": repr(b.T), "S": repr(b.S)}
            if b.C is not None:
                row["C"] = repr(b.C)
            row["RS"] = repr(b.RS)
            extra.append(row)
    src = Path(args.dataset)
    out = Path(args.out) if args.out else src.with_name(src.stem + ".classified" + (src.suffix or ".csv"))
    write_dataset(ds, out, extra)
    print(json.dumps({"output": str(out), "reviews": len(ds)}))
    return 0


def _write_report_files(report: ReputationReport, out: Path, stem: str, k: Optional[int]) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / f"{stem}.report.json",
        "summary": out / f"{stem}.summary.txt",
        "chart": out / f"{stem}.pie.svg",
    }
    emit_structured(report, paths["report"])
    paths["summary"].write_text(emit_text_summary(report, k), encoding="utf-8")
    name = report.entity_name or report.result.entity_id
    emit_pie_svg(report.result.categories, paths["chart"], title=f"Opinion categories: {name}")
    return {k: str(v) for k, v in paths.items()}


def cmd_reputation(args) -> int:
    cfg = _effective_config(args, "reputation")
    ds = _dataset(args.dataset, cfg, args.entity_id)
    result = run_pipeline(ds, cfg, _load_models(cfg))
    report = ReputationReport(
        result=result,
        config=cfg.to_dict(),
        entity_name=cfg.entity_name,
        generated_at=generation_timestamp(args.timestamp),
    )
    paths = _write_report_files(report, Path(args.out or "."), ds.entity_id, cfg.top_k)
    print(json.dumps({"entity_id": ds.entity_id, "reputation": result.reputation, **paths}))
    return 0


def cmd_sweep(args) -> int:
    cfg = _effective_config(args, "sweep")
    if not args.ground_truth:
        raise CliError("sweep needs --ground-truth FILE with entity_id,ground_truth columns")
    truth = load_ground_truth(args.ground_truth)
    entities = []
    for path in args.datasets:
        ds = _dataset(path, cfg)
        if ds.entity_id not in truth:
            raise CliError(f"no ground truth for entity {ds.entity_id!r}")
        entities.append((ds, truth[ds.entity_id]))
    grid = None
    if args.grid:
        try:
            grid = [float(x) for x in args.grid.split(",") if x.strip()]
        except ValueError:
            raise CliError(f"bad --grid {args.grid!r}") from None
    result = t0_sweep(entities, cfg, _load_models(cfg), grid)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = out / "sweep.csv"
    write_sweep_table(result, table)
    print(json.dumps({"output": str(table), "best_t0": result.best_threshold,
                      "min_maer": min(result.maer_by_threshold)}))
    return 0


def cmd_report(args) -> int:
    src = Path(args.report_json)
    report = load_structured(src)
    stem = src.name.removesuffix(".json").removesuffix(".report")
    out = Path(args.out) if args.out else src.parent
    out.mkdir(parents=True, exist_ok=True)
    summary = out / f"{stem}.summary.txt"
    chart = out / f"{stem}.pie.svg"
    summary.write_text(emit_text_summary(report, args.top_k), encoding="utf-8")
    name = report.entity_name or report.result.entity_id
    emit_pie_svg(report.result.categories, chart, title=f"Opinion categories: {name}")
    print(json.dumps({"summary": str(summary), "chart": str(chart)}))
    return 0


COMMANDS = {
    "train": cmd_train,
    "classify": cmd_classify,
    "reputation": cmd_reputation,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except SystemExit:
        raise
    except FileNotFoundError as exc:
        _fail("FileNotFoundError", f"{exc.filename or ''}: {exc.strerror or exc}".lstrip(": "))
    except Exception as exc:  # every failure becomes one machine-readable line
        _fail(type(exc).__name__, str(exc))
    return 1


if __name__ == "__main__":
    sys.exit(main())
