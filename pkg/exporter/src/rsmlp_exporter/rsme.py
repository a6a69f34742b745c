"""RSME embedding file writer.

Layout: magic "RSME", version u32, record count u32; per record the
ordinal u32, L u32, D u32, then the f32 little-endian row-major [L, D]
payload, in corpus order.  This mirrors the format the core's
"precomputed" encoder consumes.
"""

from __future__ import annotations

import struct

import numpy as np

RSME_MAGIC = b"RSME"
FORMAT_VERSION = 1


def write_rsme(path, records: list[tuple[int, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(RSME_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(records)))
        for ordinal, array in records:
            array = np.ascontiguousarray(array, dtype="<f4")
            if array.ndim != 2:
                raise ValueError("RSME records must be [L, D] matrices")
            fh.write(struct.pack("<III", ordinal, array.shape[0], array.shape[1]))
            fh.write(array.tobytes())
