"""Embedding tables and their binary file format.

Format "LCUE": magic (4 bytes), version u32 = 1, dim u32, count u64, then
``count`` records of (id u64, dim x f32), all little-endian. The f32 payload
matches typical LLM hidden-state exports; ingestion widens to float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from staytime_lab.errors import EmbeddingFormatError

MAGIC = b"LCUE"
VERSION = 1


class EmbeddingTable:
    """Opaque id -> fixed-dim float64 vector."""

    def __init__(self, dim: int, entries: dict[int, np.ndarray] | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._entries: dict[int, np.ndarray] = {}
        if entries:
            for key, vec in entries.items():
                self.put(key, vec)

    def put(self, key: int, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ValueError(f"vector for id {key} has shape {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite embedding for id {key}")
        if key in self._entries:
            raise ValueError(f"duplicate embedding id {key}")
        self._entries[int(key)] = vec

    def __contains__(self, key: int) -> bool:
        return int(key) in self._entries

    def __getitem__(self, key: int) -> np.ndarray:
        return self._entries[int(key)]

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> list[int]:
        return list(self._entries)

    def gather(self, keys, missing: str = "zero") -> tuple[np.ndarray, int]:
        """Stack vectors for ``keys``; id -1 is a pad slot and yields zeros.

        ``missing`` policy for unknown ids: "zero" substitutes a zero vector
        and counts it, "error" raises. Returns (array, n_missing).
        """
        out = np.zeros((len(keys), self.dim))
        n_missing = 0
        for i, key in enumerate(keys):
            key = int(key)
            if key == -1:
                continue
            vec = self._entries.get(key)
            if vec is None:
                if missing == "error":
                    raise KeyError(f"embedding id {key} not present in table")
                n_missing += 1
            else:
                out[i] = vec
        return out, n_missing


def write_embedding_table(table: EmbeddingTable, path) -> None:
    """Write in id order; float32 payload, so values are quantized once here."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, table.dim, len(table)))
        for key in sorted(table.ids()):
            fh.write(struct.pack("<Q", key))
            fh.write(table[key].astype("<f4").tobytes())


def read_embedding_table(path) -> EmbeddingTable:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise EmbeddingFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < 20:
        raise EmbeddingFormatError("truncated header", offset=len(data))
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != VERSION:
        raise EmbeddingFormatError(f"unsupported version {version}", offset=4)
    if dim == 0:
        raise EmbeddingFormatError("dim must be positive", offset=8)
    table = EmbeddingTable(dim)
    off = 20
    record = 8 + 4 * dim
    for _ in range(count):
        if off + record > len(data):
            raise EmbeddingFormatError("truncated record payload", offset=off)
        (key,) = struct.unpack_from("<Q", data, off)
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off + 8).astype(np.float64)
        if key in table:
            raise EmbeddingFormatError(f"duplicate id {key}", offset=off)
        table.put(key, vec)
        off += record
    if off != len(data):
        raise EmbeddingFormatError(f"{len(data) - off} trailing bytes", offset=off)
    return table
