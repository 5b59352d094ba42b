"""Bit-exact binary store for per-document embedding matrices.

Format `CGEM`, all integers little-endian:

    magic   4 bytes  b"CGEM"
    version u32      1
    n       u32      row count
    dim     u32      embedding dimension
    tag     u32 length + UTF-8 bytes (encoder tag)
    ids     n x (u32 length + UTF-8 bytes)
    payload n*dim float32, row-major
    crc     u32      CRC32 of everything after the magic

Values are stored exactly as produced by the exporter; no normalization
happens on either side of this boundary.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CGEM"
VERSION = 1


class EmbeddingFormatError(ValueError):
    """Raised for malformed or corrupt embedding files."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    ids: tuple[str, ...]
    values: np.ndarray  # (n, dim) float32
    encoder_tag: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            values = np.asarray(self.values, dtype=np.float32)
        except (ValueError, TypeError) as exc:
            raise EmbeddingFormatError(
                f"values are not a rectangular numeric matrix: {exc}"
            ) from exc
        if values.ndim != 2:
            raise EmbeddingFormatError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[1] == 0:
            raise EmbeddingFormatError("embedding dimension must be >= 1")
        if len(self.ids) != values.shape[0]:
            raise EmbeddingFormatError(
                f"{len(self.ids)} ids do not align with {values.shape[0]} rows"
            )
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            r, c = bad[0]
            raise EmbeddingFormatError(f"non-finite value at row {r}, column {c}")
        index = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if len(index) != len(self.ids):
            raise EmbeddingFormatError("duplicate ids in embedding matrix")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def align(self, subset_ids: list[str] | tuple[str, ...]) -> "EmbeddingMatrix":
        """Select/reorder rows to match subset_ids; values are never changed."""
        missing = [i for i in subset_ids if i not in self._index]
        if missing:
            raise EmbeddingFormatError(f"ids missing from embedding matrix: {', '.join(missing)}")
        rows = [self._index[i] for i in subset_ids]
        return EmbeddingMatrix(
            ids=tuple(subset_ids),
            values=self.values[rows].copy(),
            encoder_tag=self.encoder_tag,
        )


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Serialize a matrix to the CGEM format; byte-exact for identical input."""
    if matrix.n == 0:
        raise EmbeddingFormatError("empty matrix")
    body = bytearray()
    body += struct.pack("<III", VERSION, matrix.n, matrix.dim)
    body += _pack_str(matrix.encoder_tag)
    for doc_id in matrix.ids:
        body += _pack_str(doc_id)
    body += np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    Path(path).write_bytes(MAGIC + bytes(body) + struct.pack("<I", crc))


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load and validate a CGEM file (magic, version, counts, CRC, finiteness)."""
    path = Path(path)
    if not path.exists():
        raise EmbeddingFormatError(f"embedding file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < 4 + 12 + 4 or blob[:4] != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic, not a CGEM file")
    body, crc_stored = blob[4:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise EmbeddingFormatError(f"{path}: CRC mismatch, file is corrupt")

    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(body):
            raise EmbeddingFormatError(f"{path}: truncated file")
        chunk = body[off:off + n]
        off += n
        return chunk

    def take_str() -> str:
        (length,) = struct.unpack("<I", take(4))
        return take(length).decode("utf-8")

    version, n, dim = struct.unpack("<III", take(12))
    if version != VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    encoder_tag = take_str()
    ids = tuple(take_str() for _ in range(n))
    payload = take(n * dim * 4)
    if off != len(body):
        raise EmbeddingFormatError(f"{path}: {len(body) - off} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(n, dim)
    return EmbeddingMatrix(ids=ids, values=values, encoder_tag=encoder_tag)
