"""CGEM binary format: the output contract this exporter must satisfy.

Layout (little-endian): magic b"CGEM", u32 version=1, u32 n, u32 dim,
length-prefixed UTF-8 encoder tag, n length-prefixed UTF-8 ids, n*dim
float32 row-major payload, u32 CRC32 of everything after the magic.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"CGEM"
VERSION = 1


class CgemError(ValueError):
    pass


def write_cgem(ids: list[str], values: np.ndarray, encoder_tag: str,
               path: str | Path) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2 or values.shape[0] == 0:
        raise CgemError("empty matrix")
    if len(ids) != values.shape[0]:
        raise CgemError(f"{len(ids)} ids do not align with {values.shape[0]} rows")
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        r, c = bad[0]
        raise CgemError(f"non-finite value at row {r}, column {c}")

    body = bytearray()
    body += struct.pack("<III", VERSION, values.shape[0], values.shape[1])
    for text in [encoder_tag] + list(ids):
        raw = text.encode("utf-8")
        body += struct.pack("<I", len(raw)) + raw
    body += values.tobytes()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    Path(path).write_bytes(MAGIC + bytes(body) + struct.pack("<I", crc))


def read_cgem(path: str | Path) -> tuple[list[str], np.ndarray, str]:
    """Returns (ids, values, encoder_tag); validates magic, version, CRC."""
    blob = Path(path).read_bytes()
    if len(blob) < 20 or blob[:4] != MAGIC:
        raise CgemError(f"{path}: not a CGEM file")
    body, crc_stored = blob[4:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CgemError(f"{path}: CRC mismatch")
    version, n, dim = struct.unpack_from("<III", body, 0)
    if version != VERSION:
        raise CgemError(f"{path}: unsupported version {version}")
    off = 12
    strings = []
    for _ in range(n + 1):  # tag + ids
        (length,) = struct.unpack_from("<I", body, off)
        off += 4
        strings.append(body[off:off + length].decode("utf-8"))
        off += length
    values = np.frombuffer(body, dtype="<f4", count=n * dim, offset=off).reshape(n, dim)
    return strings[1:], values, strings[0]
