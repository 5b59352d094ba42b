"""CLS-embedding extraction from an encoder checkpoint.

The exporter runs inference only: one forward pass per batch, first-position
hidden state of the final layer as the document vector, truncation at
max_tokens. Any needed fine-tuning happens before this tool runs; the
checkpoint arrives ready.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cgem import write_cgem


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExportJob:
    checkpoint: str
    corpus: Path
    output: Path
    max_tokens: int = 256
    batch_size: int = 32

    def __post_init__(self):
        if self.max_tokens < 2:
            raise ExportError("max_tokens must be >= 2")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")


def load_corpus_texts(path: str | Path) -> tuple[list[str], list[str]]:
    """ids and texts from the shared JSONL corpus (one object per line)."""
    path = Path(path)
    if not path.exists():
        raise ExportError(f"corpus not found: {path}")
    ids, texts = [], []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: malformed record ({exc.msg})") from exc
            doc_id, text = rec.get("id"), rec.get("text")
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise ExportError(f"{path}:{lineno}: record needs string id and text")
            if doc_id in seen:
                raise ExportError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            ids.append(doc_id)
            texts.append(text)
    if not ids:
        raise ExportError(f"{path}: empty corpus")
    return ids, texts


def export(job: ExportJob) -> Path:
    """Write one CGEM row per corpus document, in corpus order."""
    import torch
    from transformers import AutoModel, AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()

    ids, texts = load_corpus_texts(job.corpus)
    try:
        tokenizer = AutoTokenizer.from_pretrained(job.checkpoint)
        model = AutoModel.from_pretrained(job.checkpoint)
    except Exception as exc:
        raise ExportError(f"cannot load checkpoint {job.checkpoint!r}: {exc}") from exc
    model.eval()

    rows = []
    try:
        with torch.no_grad():
            for start in range(0, len(texts), job.batch_size):
                batch = texts[start:start + job.batch_size]
                encoded = tokenizer(batch, padding=True, truncation=True,
                                    max_length=job.max_tokens, return_tensors="pt")
                hidden = model(**encoded).last_hidden_state
                rows.append(hidden[:, 0, :].to(torch.float32).cpu().numpy())
    except (RuntimeError, MemoryError) as exc:
        raise ExportError(
            f"forward pass failed ({exc}); if this is an out-of-memory error, "
            f"reduce --batch below {job.batch_size}"
        ) from exc

    values = np.vstack(rows)
    write_cgem(ids, values, encoder_tag=job.checkpoint, path=job.output)
    return Path(job.output)
