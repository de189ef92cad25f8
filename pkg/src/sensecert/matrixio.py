"""Matrix file I/O.

Two interchangeable on-disk forms:

* binary ``.scm``: 4-byte magic ``SCM1``, two little-endian uint64 fields
  (rows, cols), then rows*cols float64 values, row-major, little-endian;
* text ``.csv``: comma-separated rows, printed with 17 significant digits so
  values round-trip exactly.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"SCM1"
_HEADER = struct.Struct("<QQ")

# refuse absurd headers rather than trying to allocate petabytes
MAX_ELEMENTS = 1 << 32


def _as_2d(matrix) -> np.ndarray:
    data = getattr(matrix, "data", matrix)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


def save_scm(path: str | os.PathLike, matrix) -> None:
    arr = _as_2d(matrix)
    m, n = arr.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(m, n))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_scm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, not an SCM1 file")
    m, n = _HEADER.unpack_from(raw, len(MAGIC))
    if m == 0 or n == 0 or m * n > MAX_ELEMENTS:
        raise ValueError(f"{path}: unreasonable dimensions {m}x{n}")
    body = raw[len(MAGIC) + _HEADER.size :]
    expected = m * n * 8
    if len(body) != expected:
        raise ValueError(
            f"{path}: payload is {len(body)} bytes, header promises {expected}"
        )
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(m, n)


def save_csv(path: str | os.PathLike, matrix) -> None:
    arr = _as_2d(matrix)
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def load_csv(path: str | os.PathLike) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return arr


def save_matrix(path: str | os.PathLike, matrix) -> None:
    """Write `matrix` choosing the format from the file suffix."""
    if str(path).lower().endswith(".csv"):
        save_csv(path, matrix)
    else:
        save_scm(path, matrix)


def load_matrix(path: str | os.PathLike) -> np.ndarray:
    if str(path).lower().endswith(".csv"):
        return load_csv(path)
    return load_scm(path)
