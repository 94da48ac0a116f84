"""Flat binary checkpoint of named parameter blobs.

Layout (all integers little-endian):

    magic   4 bytes  b"PRCK"
    version u32      currently 1
    count   u32
    blob*   u32 name length, name bytes (utf-8), u8 dtype code
            (4 = float32, 8 = float64), u32 rank, u64 extents...,
            raw little-endian values
"""

from __future__ import annotations

import struct
from typing import Dict, Iterable, Union

import numpy as np

from .tensor import Parameter

MAGIC = b"PRCK"
VERSION = 1

_DTYPE_CODES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def save_checkpoint(path, params: Union[Dict[str, np.ndarray], Iterable[Parameter]]) -> None:
    if not isinstance(params, dict):
        params = {p.name: p.data for p in params}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        for name, arr in params.items():
            arr = np.asarray(arr)
            code = 4 if arr.dtype == np.float32 else 8
            dt = _DTYPE_CODES[code]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BI", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_checkpoint(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (magic {magic!r})")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            code, rank = struct.unpack("<BI", fh.read(5))
            if code not in _DTYPE_CODES:
                raise ValueError(f"{path}: unknown dtype code {code} for {name!r}")
            shape = struct.unpack(f"<{rank}Q", fh.read(8 * rank)) if rank else ()
            dt = _DTYPE_CODES[code]
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(n * dt.itemsize)
            if len(buf) != n * dt.itemsize:
                raise ValueError(f"{path}: truncated blob for {name!r}")
            out[name] = np.frombuffer(buf, dtype=dt).reshape(shape).copy()
        return out


def restore_parameters(params: Iterable[Parameter], blobs: Dict[str, np.ndarray]) -> None:
    """Copy checkpoint blobs into matching parameters (by name)."""
    for p in params:
        if p.name not in blobs:
            raise KeyError(f"checkpoint is missing parameter {p.name!r}")
        blob = blobs[p.name]
        if blob.shape != p.shape:
            raise ValueError(
                f"checkpoint shape {blob.shape} != parameter shape {p.shape} for {p.name!r}"
            )
        p.data[...] = blob.astype(p.data.dtype, copy=False)
