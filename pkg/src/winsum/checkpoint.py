"""Versioned binary checkpoints.

Layout (all integers little-endian):

    bytes 0..3   magic "WSUM"
    u32          format version (currently 1)
    u32          length of the UTF-8 JSON metadata block
    ...          metadata (sorted keys, so identical content -> identical bytes)
    u32          number of arrays
    per array:   u16 name length, name bytes,
                 u8 ndim, u32 per dimension,
                 float64 little-endian row-major data

Round trips are bit-exact: float64 in, float64 out, no re-encoding.
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"WSUM"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or mismatched checkpoint file."""


def _pack_array(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<B", arr.ndim))
    for dim in arr.shape:
        buf.write(struct.pack("<I", dim))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def dumps(arrays: dict[str, np.ndarray], meta: dict) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(meta_raw)))
    buf.write(meta_raw)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        _pack_array(buf, name, np.asarray(arr))
    return buf.getvalue()


def loads(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    view = memoryview(data)
    if bytes(view[:4]) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", view, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", view, 8)
    pos = 12
    meta = json.loads(bytes(view[pos : pos + meta_len]).decode("utf-8"))
    pos += meta_len
    (n_arrays,) = struct.unpack_from("<I", view, pos)
    pos += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack_from("<H", view, pos)
        pos += 2
        name = bytes(view[pos : pos + name_len]).decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", view, pos)
        pos += 1
        shape = []
        for _ in range(ndim):
            (dim,) = struct.unpack_from("<I", view, pos)
            pos += 4
            shape.append(dim)
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(view, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += count * 8
        arrays[name] = arr.astype(np.float64)  # native, writable copy
    return arrays, meta


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    atomic_write_bytes(path, dumps(arrays, meta))


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        return loads(fh.read())
