"""Labeled document corpora, label vocabulary, and deterministic stratified splits."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

from .rng import SplitMix64, derive_seed


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid split parameters."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: int | None = None


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    classes: tuple[str, ...]

    def __post_init__(self):
        if not self.classes:
            raise CorpusError("class list must be non-empty")
        if len(set(self.classes)) != len(self.classes):
            raise CorpusError("class names must be unique")
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            if doc.label is not None and not 0 <= doc.label < len(self.classes):
                raise CorpusError(
                    f"document {doc.id!r} has label {doc.label} outside {len(self.classes)} classes"
                )

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    def labels(self) -> list[int]:
        """Labels in document order; raises if any document is unlabeled."""
        out = []
        for d in self.documents:
            if d.label is None:
                raise CorpusError(f"document {d.id!r} is unlabeled")
            out.append(d.label)
        return out


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: tuple[int, ...]

    def fold_ids(self, corpus: Corpus, fold: int) -> list[str]:
        return [d.id for d, f in zip(corpus.documents, self.assignment) if f == fold]

    def to_json(self) -> str:
        return json.dumps(
            {"k": self.k, "seed": self.seed, "assignment": list(self.assignment)},
            separators=(",", ":"),
        )


def _read_sidecar_classes(path: Path) -> list[str] | None:
    sidecar = path.parent / "classes.json"
    if not sidecar.exists():
        return None
    classes = json.loads(sidecar.read_text(encoding="utf-8"))
    if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
        raise CorpusError(f"{sidecar}: classes.json must be a JSON array of strings")
    return classes


def _records_from_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON record ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: record must be a JSON object")
            yield lineno, rec


def _records_from_csv(path: Path):
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["id", "text"]:
            raise CorpusError(f"{path}: CSV header must start with id,text")
        for rec in reader:
            lineno = reader.line_num
            label = rec.get("label")
            yield lineno, {
                "id": rec.get("id"),
                "text": rec.get("text"),
                "label": label if label not in (None, "") else None,
            }


def load_corpus(path: str | Path, format: str | None = None,
                classes: list[str] | None = None) -> Corpus:
    """Load a corpus from JSONL or CSV, preserving input order.

    Class names come from (in priority order) the `classes` argument, a
    `classes.json` sidecar next to the file, or first-seen label order
    (with a warning, since inferred order is fragile across datasets).
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise CorpusError(f"unsupported corpus format {format!r}")

    declared = classes if classes is not None else _read_sidecar_classes(path)
    class_list: list[str] = list(declared) if declared else []
    class_index = {name: i for i, name in enumerate(class_list)}
    inferred = declared is None

    records = _records_from_jsonl(path) if format == "jsonl" else _records_from_csv(path)
    docs: list[Document] = []
    for lineno, rec in records:
        doc_id = rec.get("id")
        text = rec.get("text")
        if not isinstance(doc_id, str) or not doc_id:
            raise CorpusError(f"{path}:{lineno}: record missing string id")
        if not isinstance(text, str):
            raise CorpusError(f"{path}:{lineno}: record {doc_id!r} missing text")
        raw_label = rec.get("label")
        label: int | None = None
        if raw_label is not None:
            if not isinstance(raw_label, str) or not raw_label:
                raise CorpusError(f"{path}:{lineno}: record {doc_id!r} label must be a class name")
            if raw_label not in class_index:
                if inferred:
                    class_index[raw_label] = len(class_list)
                    class_list.append(raw_label)
                else:
                    raise CorpusError(
                        f"{path}:{lineno}: record {doc_id!r} has unknown label {raw_label!r} "
                        f"(declared classes: {', '.join(class_list)})"
                    )
            label = class_index[raw_label]
        docs.append(Document(id=doc_id, text=text, label=label))

    if not docs:
        raise CorpusError(f"{path}: empty corpus")
    if not class_list:
        raise CorpusError(f"{path}: no classes declared and no labels to infer them from")
    if inferred:
        warnings.warn(
            f"{path}: class order inferred from first-seen labels "
            f"({', '.join(class_list)}); declare classes.json for stability",
            stacklevel=2,
        )
    return Corpus(documents=tuple(docs), classes=tuple(class_list))


def stratified_folds(corpus: Corpus, k: int, seed: int) -> FoldPlan:
    """Assign every document to one of k folds, stratified by class.

    Within each class, documents are shuffled by a SplitMix64 stream seeded
    from (seed, class index) and dealt round-robin from a random starting
    fold, so per-class fold sizes differ by at most one.
    """
    if k < 2:
        raise CorpusError(f"fold count must be >= 2, got {k}")
    labels = corpus.labels()

    by_class: dict[int, list[int]] = {}
    for pos, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(pos)
    for lab, members in sorted(by_class.items()):
        if len(members) < k:
            raise CorpusError(
                f"class {corpus.classes[lab]!r} has {len(members)} documents, fewer than k={k}"
            )

    assignment = [0] * len(corpus)
    for lab, members in sorted(by_class.items()):
        rng = SplitMix64(derive_seed(seed, lab))
        offset = rng.next_below(k)
        order = list(members)
        rng.shuffle(order)
        for i, pos in enumerate(order):
            assignment[pos] = (i + offset) % k
    return FoldPlan(k=k, seed=seed, assignment=tuple(assignment))


def split(corpus: Corpus, plan: FoldPlan, test_fold: int,
          validation_fraction: float = 0.1) -> tuple[list[Document], list[Document], list[Document]]:
    """Partition the corpus into (train, validation, test) document lists.

    Test = documents assigned to `test_fold`. Validation = a stratified
    `validation_fraction` of the remaining pool, drawn per class through
    the same PRNG discipline (seeded by seed, class, test fold). All three
    lists preserve corpus order.
    """
    if not 0 <= test_fold < plan.k:
        raise CorpusError(f"test_fold {test_fold} out of range for k={plan.k}")
    if not 0.0 < validation_fraction < 1.0:
        raise CorpusError(f"validation_fraction must be in (0,1), got {validation_fraction}")
    if len(plan.assignment) != len(corpus):
        raise CorpusError("fold plan does not match corpus size")
    labels = corpus.labels()

    test_pos = {i for i, f in enumerate(plan.assignment) if f == test_fold}
    pool_by_class: dict[int, list[int]] = {}
    for pos, lab in enumerate(labels):
        if pos not in test_pos:
            pool_by_class.setdefault(lab, []).append(pos)

    val_pos: set[int] = set()
    for lab, members in sorted(pool_by_class.items()):
        n_val = int(validation_fraction * len(members) + 0.5)
        if n_val >= len(members):
            raise CorpusError(
                f"validation_fraction {validation_fraction} leaves class "
                f"{corpus.classes[lab]!r} empty in train"
            )
        rng = SplitMix64(derive_seed(plan.seed, lab, test_fold, 0x56414C))
        order = list(members)
        rng.shuffle(order)
        val_pos.update(order[:n_val])

    train, validation, test = [], [], []
    for pos, doc in enumerate(corpus.documents):
        if pos in test_pos:
            test.append(doc)
        elif pos in val_pos:
            validation.append(doc)
        else:
            train.append(doc)
    return train, validation, test
