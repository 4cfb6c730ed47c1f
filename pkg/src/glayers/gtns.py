"""GTNS tensor container: a tiny self-describing binary format for dense f64 arrays.

Layout: bytes ``GTNS``, version u32=1, rank u32, extents as u64 little-endian,
payload f64 little-endian row-major. Complex tensors are stored with a trailing
extent of 2 holding (re, im).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"GTNS"
VERSION = 1


def complex_to_trailing(arr: np.ndarray) -> np.ndarray:
    """View a complex array as a real array with a trailing extent of 2."""
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    return arr.view(np.float64).reshape(arr.shape + (2,))


def trailing_to_complex(arr: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complex_to_trailing`."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise FormatError("complex view requires a trailing extent of 2")
    return arr.view(np.complex128).reshape(arr.shape[:-1])


def write_gtns(path, arr: np.ndarray) -> None:
    """Write a dense tensor; complex input is stored with a trailing extent of 2."""
    if np.iscomplexobj(arr):
        arr = complex_to_trailing(np.asarray(arr))
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.astype("<f8").tobytes(order="C"))


def read_gtns(path) -> np.ndarray:
    """Read a tensor written by :func:`write_gtns` (always returns float64)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        header = fh.read(8)
        if len(header) != 8:
            raise FormatError("truncated header")
        version, rank = struct.unpack("<II", header)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        raw = fh.read(8 * rank)
        if len(raw) != 8 * rank:
            raise FormatError("truncated extents")
        extents = struct.unpack(f"<{rank}Q", raw)
        if any(e < 1 for e in extents):
            raise FormatError(f"all extents must be >= 1, got {extents}")
        count = int(np.prod(extents))
        payload = fh.read(8 * count)
        if len(payload) != 8 * count:
            raise FormatError("truncated payload")
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape(extents)
