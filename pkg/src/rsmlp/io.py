"""Binary file formats: RSMC checkpoints and RSME precomputed embeddings.

RSMC: magic "RSMC", version u32, tensor count u32; per tensor a u16 name
length, UTF-8 name, rank u8, one u32 per dim, then the f32 little-endian
payload.  Tensors are written sorted by name so repeated saves are
byte-identical.

RSME: magic "RSME", version u32, record count u32; per record ordinal u32,
L u32, D u32, then f32 little-endian row-major [L, D] data, in corpus order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import IncompatibleCheckpoint

RSMC_MAGIC = b"RSMC"
RSME_MAGIC = b"RSME"
FORMAT_VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(RSMC_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(tensors)))
        for name in sorted(tensors):
            array = np.ascontiguousarray(tensors[name], dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", array.ndim))
            for dim in array.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(array.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IncompatibleCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[:4] != RSMC_MAGIC:
        raise IncompatibleCheckpoint(f"{path} is not an RSMC checkpoint")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpoint(f"unsupported checkpoint version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", blob, offset) if rank else ()
            offset += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            array = np.frombuffer(blob, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            tensors[name] = array.reshape(shape).copy()
    except (struct.error, ValueError) as exc:
        raise IncompatibleCheckpoint(f"truncated or corrupt checkpoint {path}") from exc
    return tensors


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


def read_rsme(path) -> list[tuple[int, np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IncompatibleCheckpoint(f"cannot read embedding file {path}: {exc}") from exc
    if blob[:4] != RSME_MAGIC:
        raise IncompatibleCheckpoint(f"{path} is not an RSME embedding file")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpoint(f"unsupported embedding file version {version}")
    offset = 12
    records: list[tuple[int, np.ndarray]] = []
    for _ in range(count):
        ordinal, rows, cols = struct.unpack_from("<III", blob, offset)
        offset += 12
        array = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=offset)
        offset += 4 * rows * cols
        records.append((ordinal, array.reshape(rows, cols).copy()))
    return records
