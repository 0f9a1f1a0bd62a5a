"""Binary float32 matrix container used for every feature tensor on disk.

Layout: magic "O3DF", u32 version (=1), u64 rows, u64 cols, then
rows*cols float32 values row-major. All fields little-endian.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"O3DF"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class MatrixError(ValueError):
    pass


class BadMagicError(MatrixError):
    pass


class TruncatedMatrixError(MatrixError):
    pass


class NonFiniteMatrixError(MatrixError):
    pass


def save_matrix(path, values) -> None:
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise MatrixError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteMatrixError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f4").tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TruncatedMatrixError(f"{path}: header truncated")
        magic, version, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise MatrixError(f"{path}: unsupported version {version}")
        payload = fh.read(rows * cols * 4)
    if len(payload) != rows * cols * 4:
        raise TruncatedMatrixError(
            f"{path}: expected {rows * cols} values, payload holds {len(payload) // 4}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)
    if not np.isfinite(arr).all():
        raise NonFiniteMatrixError(f"{path}: non-finite value in payload")
    return arr
