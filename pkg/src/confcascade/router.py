"""Confidence-gated routing between the local classifier and the LLM backend.

A document goes to the LLM exactly when its max class probability is
strictly below the threshold; boundary equality stays local. Unparseable
LLM verdicts fall back to the local prediction by default, so the cascade
is never worse than its cheap stage because of a parse failure.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .classifier import CalibratedModel, predict_proba
from .corpus import Document
from .embeddings import EmbeddingMatrix
from .gateway import (
    BackendConfig,
    CompletionBackend,
    LlmVerdict,
    PromptTemplate,
    build_backend,
    classify_batch,
    render_prompt,
)
from .ledger import CostLedger
from .metrics import macro_f1

DEFAULT_GRID = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99)

ROUTE_LOCAL = "LOCAL"
ROUTE_LLM = "LLM"


def sends_to_llm(confidence: float, threshold: float) -> bool:
    """The routing rule: strictly below threshold goes to the LLM."""
    return confidence < threshold


class RoutingError(RuntimeError):
    def __init__(self, message: str, completed: int):
        super().__init__(f"{message} ({completed} documents completed)")
        self.completed = completed


@dataclass(frozen=True)
class RouterConfig:
    threshold: float = 0.95
    unparsed_policy: str = "fallback_local"  # or "error"
    template: PromptTemplate = PromptTemplate()
    backend: BackendConfig = BackendConfig()

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0,1], got {self.threshold}")
        if self.unparsed_policy not in ("fallback_local", "error"):
            raise ValueError(f"unknown unparsed_policy {self.unparsed_policy!r}")


@dataclass(frozen=True)
class RoutingOutcome:
    doc_id: str
    confidence: float
    route: str
    local_label: int
    llm_verdict: LlmVerdict | None
    final_label: int


@dataclass(frozen=True)
class RoutedSubsetReport:
    n_total: int
    n_routed: int
    pct_routed: float
    macro_f1_routed: float | None
    macro_f1_local: float | None
    macro_f1_overall: float


def route(model: CalibratedModel, embeddings: EmbeddingMatrix, docs: list[Document],
          config: RouterConfig, backend: CompletionBackend | None, classes: tuple[str, ...],
          ledger: CostLedger | None = None, fold: int = 0) -> list[RoutingOutcome]:
    """Route every document; outcomes come back in input order.

    `backend` may be a pre-built completion backend (tests inject mocks this
    way); None builds one from config.backend. Phase wall times (local
    prediction, LLM prompting) are appended to the ledger when one is given.
    """
    if backend is None:
        backend = build_backend(config.backend)
    if embeddings.n != len(docs) or any(e != d.id for e, d in zip(embeddings.ids, docs)):
        raise ValueError("embeddings are not aligned with documents")
    if model.n_classes != len(classes):
        raise ValueError(
            f"model has {model.n_classes} classes, corpus has {len(classes)}"
        )

    start = time.monotonic()
    local = predict_proba(model, embeddings.values)
    if ledger is not None:
        ledger.add("prediction", time.monotonic() - start, fold=fold)

    routed_idx = [i for i, pv in enumerate(local)
                  if sends_to_llm(pv.confidence, config.threshold)]
    verdicts: dict[int, LlmVerdict] = {}
    llm_seconds = 0.0
    if routed_idx:
        prompts = [render_prompt(config.template, classes, docs[i].text) for i in routed_idx]
        start = time.monotonic()
        batch = classify_batch(backend, prompts, classes,
                               doc_ids=[docs[i].id for i in routed_idx])
        llm_seconds = time.monotonic() - start
        verdicts = dict(zip(routed_idx, batch))
    if ledger is not None:
        ledger.add("llm_prompting", llm_seconds, fold=fold)

    outcomes: list[RoutingOutcome] = []
    for i, (doc, pv) in enumerate(zip(docs, local)):
        if i in verdicts:
            verdict = verdicts[i]
            if verdict.parsed_label is None:
                if config.unparsed_policy == "error":
                    raise RoutingError(
                        f"unparseable completion for document {doc.id!r}: {verdict.error or verdict.raw_completion!r}",
                        completed=len(outcomes),
                    )
                final = pv.argmax
            else:
                final = verdict.parsed_label
            outcomes.append(RoutingOutcome(
                doc_id=doc.id, confidence=pv.confidence, route=ROUTE_LLM,
                local_label=pv.argmax, llm_verdict=verdict, final_label=final,
            ))
        else:
            outcomes.append(RoutingOutcome(
                doc_id=doc.id, confidence=pv.confidence, route=ROUTE_LOCAL,
                local_label=pv.argmax, llm_verdict=None, final_label=pv.argmax,
            ))
    return outcomes


def tune_threshold(model: CalibratedModel, embeddings: EmbeddingMatrix,
                   labels: list[int], docs: list[Document], grid: tuple[float, ...],
                   config: RouterConfig, backend: CompletionBackend | None,
                   classes: tuple[str, ...]) -> tuple[float, list[tuple[float, float]]]:
    """Pick the grid threshold maximizing validation Macro-F1.

    Ties break toward the smallest threshold (fewest LLM calls). Each
    document's LLM verdict is independent of the threshold, so the backend
    is queried once per document at most, not once per grid point.
    """
    if backend is None:
        backend = build_backend(config.backend)
    if not docs:
        raise ValueError("empty validation set")
    if not grid or list(grid) != sorted(set(grid)):
        raise ValueError("grid must be non-empty and strictly increasing")
    if not all(0.0 < g <= 1.0 for g in grid):
        raise ValueError("grid thresholds must be in (0,1]")

    local = predict_proba(model, embeddings.values)
    widest = max(grid)
    routable = [i for i, pv in enumerate(local) if sends_to_llm(pv.confidence, widest)]
    llm_label: dict[int, int] = {}
    if routable:
        prompts = [render_prompt(config.template, classes, docs[i].text) for i in routable]
        batch = classify_batch(backend, prompts, classes,
                               doc_ids=[docs[i].id for i in routable])
        for i, verdict in zip(routable, batch):
            if verdict.parsed_label is None and config.unparsed_policy == "error":
                raise RoutingError(
                    f"unparseable completion for document {docs[i].id!r}", completed=0
                )
            llm_label[i] = verdict.parsed_label if verdict.parsed_label is not None \
                else local[i].argmax

    table: list[tuple[float, float]] = []
    best_t, best_f1 = grid[0], -1.0
    for t in grid:
        preds = [
            llm_label[i] if sends_to_llm(local[i].confidence, t) else local[i].argmax
            for i in range(len(docs))
        ]
        f1 = macro_f1(labels, preds, len(classes))
        table.append((t, f1))
        if f1 > best_f1:
            best_t, best_f1 = t, f1
    return best_t, table


def sweep(model: CalibratedModel, embeddings: EmbeddingMatrix, docs: list[Document],
          labels: list[int], config: RouterConfig, backend: CompletionBackend | None,
          classes: tuple[str, ...], grid: tuple[float, ...],
          measure_time: bool = True) -> list[dict]:
    """One cascade evaluation per grid threshold.

    Rows carry threshold, macro_f1, instances_sent, pct, total_time_s;
    instances_sent is non-decreasing in threshold. With measure_time off
    (replay/mock runs) the time column is 0.0 so reruns are byte-stable.
    """
    if backend is None:
        backend = build_backend(config.backend)
    rows = []
    for t in grid:
        cfg = replace(config, threshold=t)
        start = time.monotonic()
        outcomes = route(model, embeddings, docs, cfg, backend, classes)
        elapsed = time.monotonic() - start if measure_time else 0.0
        sent = sum(1 for o in outcomes if o.route == ROUTE_LLM)
        f1 = macro_f1(labels, [o.final_label for o in outcomes], len(classes))
        rows.append({
            "threshold": t,
            "macro_f1": f1,
            "instances_sent": sent,
            "pct": 100.0 * sent / len(docs) if docs else 0.0,
            "total_time_s": elapsed,
        })
    return rows


def audit(outcomes: list[RoutingOutcome], labels: list[int],
          n_classes: int) -> RoutedSubsetReport:
    """Count and score the LLM-routed subset against the local subset."""
    if len(outcomes) != len(labels):
        raise ValueError(f"{len(outcomes)} outcomes vs {len(labels)} labels")
    routed = [(o.final_label, y) for o, y in zip(outcomes, labels) if o.route == ROUTE_LLM]
    kept = [(o.final_label, y) for o, y in zip(outcomes, labels) if o.route == ROUTE_LOCAL]
    n = len(outcomes)

    def subset_f1(pairs):
        if not pairs:
            return None
        preds, truths = [p for p, _ in pairs], [y for _, y in pairs]
        return macro_f1(truths, preds, n_classes)

    return RoutedSubsetReport(
        n_total=n,
        n_routed=len(routed),
        pct_routed=100.0 * len(routed) / n if n else 0.0,
        macro_f1_routed=subset_f1(routed),
        macro_f1_local=subset_f1(kept),
        macro_f1_overall=macro_f1(labels, [o.final_label for o in outcomes], n_classes)
        if outcomes else 0.0,
    )


def outcomes_to_jsonl(outcomes: list[RoutingOutcome], path: str | Path) -> None:
    """One JSON object per document: id, confidence, route, labels, latency."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for o in outcomes:
            fh.write(json.dumps({
                "id": o.doc_id,
                "confidence": round(o.confidence, 12),
                "route": o.route,
                "local_label": o.local_label,
                "llm_label": o.llm_verdict.parsed_label if o.llm_verdict else None,
                "final_label": o.final_label,
                "latency": round(o.llm_verdict.latency, 6) if o.llm_verdict else 0.0,
            }, separators=(",", ":")) + "\n")
