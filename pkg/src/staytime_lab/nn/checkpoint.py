"""Binary parameter checkpoints.

Layout: magic ``LCUW``, version u32, then zero or more named sections of
(name length u16, UTF-8 name, rows u32, cols u32, row-major little-endian
float64 payload). Sections run to end of file.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from staytime_lab.errors import CheckpointFormatError

MAGIC = b"LCUW"
VERSION = 1


def save_sections(path, sections: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in sections.items():
            arr = np.ascontiguousarray(np.atleast_2d(np.asarray(arr, dtype=np.float64)))
            if arr.ndim != 2:
                raise CheckpointFormatError(f"section {name!r} is not 2-D")
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise CheckpointFormatError(f"section name too long: {name!r}")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8").tobytes())


def load_sections(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    sections: dict[str, np.ndarray] = {}
    off = 8
    while off < len(data):
        if off + 2 > len(data):
            raise CheckpointFormatError(f"truncated section header at offset {off}")
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + name_len + 8 > len(data):
            raise CheckpointFormatError(f"truncated section header at offset {off}")
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        rows, cols = struct.unpack_from("<II", data, off)
        off += 8
        nbytes = rows * cols * 8
        if off + nbytes > len(data):
            raise CheckpointFormatError(
                f"truncated payload for section {name!r} at offset {off}"
            )
        if name in sections:
            raise CheckpointFormatError(f"duplicate section name {name!r}")
        arr = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=off)
        sections[name] = arr.reshape(rows, cols).astype(np.float64)
        off += nbytes
    return sections
