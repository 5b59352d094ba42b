"""Consistency checks between a CGEM file and the corpus it was built from."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .cgem import read_cgem
from .export import load_corpus_texts


@dataclass
class VerifyReport:
    ok: bool
    n: int
    dim: int
    encoder_tag: str
    mismatches: list[str] = field(default_factory=list)
    dim_mean_range: tuple[float, float] = (0.0, 0.0)
    dim_std_range: tuple[float, float] = (0.0, 0.0)

    def render(self) -> str:
        if self.ok:
            lines = [f"OK, n={self.n}, dim={self.dim}, encoder_tag={self.encoder_tag!r}"]
        else:
            lines = [f"MISMATCH ({len(self.mismatches)} problems)"] + \
                    [f"  - {m}" for m in self.mismatches]
        lines.append(
            f"per-dimension mean in [{self.dim_mean_range[0]:.4f}, {self.dim_mean_range[1]:.4f}], "
            f"std in [{self.dim_std_range[0]:.4f}, {self.dim_std_range[1]:.4f}]"
        )
        return "\n".join(lines)


def verify(cgem_path: str | Path, corpus_path: str | Path) -> VerifyReport:
    """Confirm id alignment, dimension, CRC; every mismatch is listed."""
    ids, values, tag = read_cgem(cgem_path)  # raises on CRC/format damage
    corpus_ids, _ = load_corpus_texts(corpus_path)

    mismatches = []
    if len(ids) != len(corpus_ids):
        mismatches.append(f"row count {len(ids)} != corpus size {len(corpus_ids)}")
    present = set(ids)
    for doc_id in corpus_ids:
        if doc_id not in present:
            mismatches.append(f"corpus id {doc_id!r} missing from embeddings")
    wanted = set(corpus_ids)
    for doc_id in ids:
        if doc_id not in wanted:
            mismatches.append(f"embedding id {doc_id!r} not in corpus")
    for pos, (a, b) in enumerate(zip(ids, corpus_ids)):
        if a != b:
            mismatches.append(f"row {pos} is {a!r}, corpus order expects {b!r}")
            break  # one order mismatch implies the rest; keep the report short

    means = values.mean(axis=0)
    stds = values.std(axis=0)
    return VerifyReport(
        ok=not mismatches,
        n=values.shape[0],
        dim=values.shape[1],
        encoder_tag=tag,
        mismatches=mismatches,
        dim_mean_range=(float(means.min()), float(means.max())),
        dim_std_range=(float(stds.min()), float(stds.max())),
    )
