"""Orchestration of the full evaluation protocol over stratified folds.

Each command materializes everything it produced under the manifest's
output directory, with the manifest copied in, so a run is reproducible
from (manifest, input files, cassette) alone.
"""

from __future__ import annotations

import json
import shutil
from collections import Counter
from pathlib import Path

from . import plots, reports
from .classifier import load_model, save_model, train
from .corpus import Corpus, Document, load_corpus, split, stratified_folds
from .embeddings import EmbeddingMatrix, read_embeddings
from .gateway import build_backend, classify_batch, render_prompt, write_cassette
from .ledger import CostLedger
from .manifest import RunManifest
from .metrics import fold_summary, macro_f1
from .router import RouterConfig, audit, outcomes_to_jsonl, route, sweep, tune_threshold

METHODS = ("local_only", "cascade", "llm_only")


def _load_inputs(manifest: RunManifest) -> tuple[Corpus, EmbeddingMatrix]:
    corpus = load_corpus(manifest.corpus_path, format=manifest.corpus_format)
    matrix = read_embeddings(manifest.embeddings_path)
    matrix = matrix.align(corpus.ids)
    return corpus, matrix


def _prepare_outdir(manifest: RunManifest) -> Path:
    outdir = manifest.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    if manifest.source_path is not None:
        shutil.copyfile(manifest.source_path, outdir / "manifest.toml")
    return outdir


def _subset(corpus: Corpus, matrix: EmbeddingMatrix,
            docs: list[Document]) -> tuple[EmbeddingMatrix, list[int]]:
    ids = [d.id for d in docs]
    return matrix.align(ids), [d.label for d in docs]


def _router_config(manifest: RunManifest, threshold: float) -> RouterConfig:
    return RouterConfig(
        threshold=threshold,
        unparsed_policy=manifest.unparsed_policy,
        template=manifest.template,
        backend=manifest.backend,
    )


def run_train(manifest: RunManifest) -> list[Path]:
    """Train and persist one calibrated model per fold."""
    corpus, matrix = _load_inputs(manifest)
    outdir = _prepare_outdir(manifest)
    model_dir = outdir / "models"
    model_dir.mkdir(exist_ok=True)
    ledger = CostLedger(zero=manifest.timing == "zero")
    plan = stratified_folds(corpus, manifest.k, manifest.seed)

    paths = []
    for fold in range(manifest.k):
        train_docs, _, _ = split(corpus, plan, fold, manifest.validation_fraction)
        X, y = _subset(corpus, matrix, train_docs)
        with ledger.record("classifier_training", fold=fold):
            model = train(X.values, y, n_classes=len(corpus.classes))
        path = model_dir / f"fold{fold}.model"
        save_model(model, path)
        paths.append(path)

    reports.write_cost(ledger.records, manifest.cost, manifest.corpus_path.stem,
                       "train", outdir / "cost.csv", outdir / "cost.txt")
    return paths


def _fold_model(manifest: RunManifest, outdir: Path, fold: int, X, y,
                n_classes: int, ledger: CostLedger):
    path = outdir / "models" / f"fold{fold}.model"
    if path.exists():
        with ledger.record("classifier_training", fold=fold):
            return load_model(path)
    path.parent.mkdir(exist_ok=True)
    with ledger.record("classifier_training", fold=fold):
        model = train(X, y, n_classes=n_classes)
    save_model(model, path)
    return model


def _llm_only_labels(manifest: RunManifest, backend, classes, docs, local_argmax):
    prompts = [render_prompt(manifest.template, classes, d.text) for d in docs]
    verdicts = classify_batch(backend, prompts, classes, doc_ids=[d.id for d in docs])
    return [
        v.parsed_label if v.parsed_label is not None else local_argmax[i]
        for i, v in enumerate(verdicts)
    ]


def run_evaluate(manifest: RunManifest) -> dict:
    """Tune, route, and score every fold; emit the full report bundle."""
    outdir = _prepare_outdir(manifest)
    ledger = CostLedger(zero=manifest.timing == "zero")
    corpus = load_corpus(manifest.corpus_path, format=manifest.corpus_format)
    with ledger.record("representation", fold=0):
        matrix = read_embeddings(manifest.embeddings_path).align(corpus.ids)
    backend = build_backend(manifest.backend)
    plan = stratified_folds(corpus, manifest.k, manifest.seed)
    n_classes = len(corpus.classes)

    per_method: dict[str, list[float]] = {m: [] for m in METHODS}
    audit_rows = []
    thresholds = []
    reliability: list[tuple[float, bool]] = []

    for fold in range(manifest.k):
        train_docs, val_docs, test_docs = split(corpus, plan, fold,
                                                manifest.validation_fraction)
        X_train, y_train = _subset(corpus, matrix, train_docs)
        X_val, y_val = _subset(corpus, matrix, val_docs)
        X_test, y_test = _subset(corpus, matrix, test_docs)

        model = _fold_model(manifest, outdir, fold, X_train.values, y_train,
                            n_classes, ledger)

        if manifest.threshold is not None:
            threshold = manifest.threshold
            ledger.add("threshold_tuning", 0.0, fold=fold)
        else:
            cfg = _router_config(manifest, manifest.grid[0])
            with ledger.record("threshold_tuning", fold=fold):
                threshold, _ = tune_threshold(model, X_val, y_val, val_docs,
                                              manifest.grid, cfg, backend,
                                              corpus.classes)
        thresholds.append(threshold)

        cfg = _router_config(manifest, threshold)
        outcomes = route(model, X_test, test_docs, cfg, backend, corpus.classes,
                         ledger=ledger, fold=fold)
        outcomes_to_jsonl(outcomes, outdir / f"outcomes-fold{fold}.jsonl")

        local_argmax = [o.local_label for o in outcomes]
        per_method["cascade"].append(
            macro_f1(y_test, [o.final_label for o in outcomes], n_classes))
        per_method["local_only"].append(macro_f1(y_test, local_argmax, n_classes))
        per_method["llm_only"].append(macro_f1(
            y_test, _llm_only_labels(manifest, backend, corpus.classes, test_docs,
                                     local_argmax), n_classes))

        report = audit(outcomes, y_test, n_classes)
        audit_rows.append({
            "fold": fold, "threshold": threshold, "n_total": report.n_total,
            "n_routed": report.n_routed, "pct_routed": report.pct_routed,
            "macro_f1_routed": report.macro_f1_routed,
            "macro_f1_local": report.macro_f1_local,
            "macro_f1_overall": report.macro_f1_overall,
        })
        reliability.extend(
            (o.confidence, o.local_label == y) for o, y in zip(outcomes, y_test))

    scores = [fold_summary(per_method[m], method=m) for m in METHODS]
    reports.write_effectiveness(scores, outdir / "effectiveness.csv",
                                outdir / "effectiveness.txt")
    reports.write_ttest_matrix(scores, outdir / "ttest.csv")
    reports.write_audit(audit_rows, outdir / "audit.csv")
    reports.write_cost(ledger.records, manifest.cost, manifest.corpus_path.stem,
                       "cascade", outdir / "cost.csv", outdir / "cost.txt")

    ece = _pooled_ece(reliability)
    with (outdir / "reliability.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("confidence,correct\n")
        for conf, ok in reliability:
            fh.write(f"{conf:.12f},{1 if ok else 0}\n")

    summary = {
        "k": manifest.k,
        "seed": manifest.seed,
        "thresholds_per_fold": thresholds,
        "threshold_mode": _mode(thresholds),
        "macro_f1_mean": {m: fold_summary(per_method[m]).mean for m in METHODS},
        "local_ece_10bin": ece,
        "classes": list(corpus.classes),
        "n_documents": len(corpus),
    }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    plots.figure_effectiveness(scores, outdir / "effectiveness.png")
    plots.figure_reliability([c for c, _ in reliability], [ok for _, ok in reliability],
                             10, ece, outdir / "reliability.png")
    return summary


def _pooled_ece(reliability: list[tuple[float, bool]], bins: int = 10) -> float:
    n = len(reliability)
    if n == 0:
        return 0.0
    conf_sum = [0.0] * bins
    hit_sum = [0] * bins
    count = [0] * bins
    for conf, ok in reliability:
        idx = min(bins - 1, int(conf * bins))
        conf_sum[idx] += conf
        hit_sum[idx] += 1 if ok else 0
        count[idx] += 1
    return sum(
        (count[i] / n) * abs(hit_sum[i] / count[i] - conf_sum[i] / count[i])
        for i in range(bins) if count[i]
    )


def _mode(values: list[float]) -> float:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def run_sweep(manifest: RunManifest) -> list[dict]:
    """Cascade series per grid threshold, averaged over folds."""
    corpus, matrix = _load_inputs(manifest)
    outdir = _prepare_outdir(manifest)
    backend = build_backend(manifest.backend)
    plan = stratified_folds(corpus, manifest.k, manifest.seed)
    n_classes = len(corpus.classes)
    measure = manifest.timing == "measured"

    fold_rows: list[list[dict]] = []
    for fold in range(manifest.k):
        train_docs, _, test_docs = split(corpus, plan, fold, manifest.validation_fraction)
        X_train, y_train = _subset(corpus, matrix, train_docs)
        X_test, y_test = _subset(corpus, matrix, test_docs)
        model = train(X_train.values, y_train, n_classes=n_classes)
        cfg = _router_config(manifest, manifest.grid[0])
        fold_rows.append(sweep(model, X_test, test_docs, y_test, cfg, backend,
                               corpus.classes, manifest.grid, measure_time=measure))

    averaged = []
    for i, t in enumerate(manifest.grid):
        rows = [fr[i] for fr in fold_rows]
        averaged.append({
            "threshold": t,
            "macro_f1": sum(r["macro_f1"] for r in rows) / len(rows),
            "instances_sent": sum(r["instances_sent"] for r in rows) / len(rows),
            "pct": sum(r["pct"] for r in rows) / len(rows),
            "total_time_s": sum(r["total_time_s"] for r in rows) / len(rows),
        })
    reports.write_sweep(averaged, outdir / "sweep.csv")
    plots.figure_sweep(averaged, outdir / "sweep.png")
    return averaged


def run_route(manifest: RunManifest, model_path: str | Path,
              threshold: float | None = None) -> Path:
    """Route a whole corpus with one persisted model; audit when labels exist."""
    corpus, matrix = _load_inputs(manifest)
    outdir = _prepare_outdir(manifest)
    model = load_model(model_path)
    backend = build_backend(manifest.backend)
    t = threshold if threshold is not None else (manifest.threshold or 0.95)
    cfg = _router_config(manifest, t)
    outcomes = route(model, matrix, list(corpus.documents), cfg, backend, corpus.classes)
    out_path = outdir / "outcomes.jsonl"
    outcomes_to_jsonl(outcomes, out_path)

    if all(d.label is not None for d in corpus.documents):
        report = audit(outcomes, corpus.labels(), len(corpus.classes))
        reports.write_audit([{
            "fold": 0, "threshold": t, "n_total": report.n_total,
            "n_routed": report.n_routed, "pct_routed": report.pct_routed,
            "macro_f1_routed": report.macro_f1_routed,
            "macro_f1_local": report.macro_f1_local,
            "macro_f1_overall": report.macro_f1_overall,
        }], outdir / "audit.csv")
    return out_path


def run_export_cassette(manifest: RunManifest, out_path: str | Path,
                        from_labels: bool = True) -> Path:
    """Record a replay cassette for every document in the corpus.

    With from_labels, completions are oracle answers built from the gold
    labels; otherwise the configured backend is queried live.
    """
    corpus = load_corpus(manifest.corpus_path, format=manifest.corpus_format)
    entries: dict[str, str] = {}
    backend = None if from_labels else build_backend(manifest.backend)
    from .gateway import prompt_sha256  # local import to keep module top lean

    for doc in corpus.documents:
        prompt = render_prompt(manifest.template, corpus.classes, doc.text)
        if from_labels:
            if doc.label is None:
                raise ValueError(f"document {doc.id!r} is unlabeled; cannot build oracle cassette")
            completion = f" {corpus.classes[doc.label]}."
        else:
            completion = backend.complete(prompt)
        entries[prompt_sha256(prompt)] = completion
    write_cassette(entries, out_path)
    return Path(out_path)


def run_report(run_dir: str | Path) -> None:
    """Regenerate text tables and figures from an existing run's CSV files."""
    run_dir = Path(run_dir)
    eff = run_dir / "effectiveness.csv"
    if eff.exists():
        scores = reports.read_effectiveness(eff)
        reports.write_effectiveness(scores, eff, run_dir / "effectiveness.txt")
        plots.figure_effectiveness(scores, run_dir / "effectiveness.png")
    swp = run_dir / "sweep.csv"
    if swp.exists():
        rows = reports.read_sweep(swp)
        plots.figure_sweep(rows, run_dir / "sweep.png")
    rel = run_dir / "reliability.csv"
    if rel.exists():
        confs, oks = [], []
        for line in rel.read_text(encoding="utf-8").splitlines()[1:]:
            c, ok = line.split(",")
            confs.append(float(c))
            oks.append(ok == "1")
        pooled = list(zip(confs, oks))
        plots.figure_reliability(confs, oks, 10, _pooled_ece(pooled),
                                 run_dir / "reliability.png")
