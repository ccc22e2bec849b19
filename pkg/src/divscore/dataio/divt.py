"""DIVT codec: the little-endian 2-D float32 tensor exchange format.

Layout:

    4 bytes | magic "DIVT"
    u32 LE  | version, currently 1
    u64 LE  | rows
    u64 LE  | cols
    f32 LE  | rows * cols values, row-major

Feature matrices, probability matrices, and text embeddings all travel in
this format, so a single codec covers the whole component boundary.
NaN and infinity are rejected in both directions.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from divscore.dataio.errors import (
    BadMagicError,
    BadVersionError,
    DimOverflowError,
    EmptyTensorError,
    NonFiniteError,
    SizeMismatchError,
    TruncatedError,
)

MAGIC = b"DIVT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
_MAX_ELEMENTS = 1 << 40


def read_divt(data: bytes) -> np.ndarray:
    """Decode DIVT bytes into a (rows, cols) float32 array."""
    if len(data) < _HEADER.size:
        raise TruncatedError(f"need {_HEADER.size} header bytes, have {len(data)}")
    magic, version, rows, cols = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}, expected {VERSION}")
    if rows == 0 or cols == 0:
        raise EmptyTensorError(f"empty tensor: {rows}x{cols}")
    if rows * cols > _MAX_ELEMENTS:
        raise DimOverflowError(f"declared {rows * cols} elements, limit {_MAX_ELEMENTS}")
    expected = rows * cols * 4
    payload = len(data) - _HEADER.size
    if payload != expected:
        raise SizeMismatchError(
            f"{rows}x{cols} needs {expected} payload bytes, have {payload}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if not np.isfinite(values).all():
        raise NonFiniteError("payload contains NaN or infinity")
    return values.reshape(rows, cols).copy()


def write_divt(matrix: np.ndarray) -> bytes:
    """Encode a 2-D real matrix as DIVT bytes (values stored as float32)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise SizeMismatchError(f"matrix must be 2-D, got shape {matrix.shape}")
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        raise EmptyTensorError(f"empty tensor: {rows}x{cols}")
    values = np.ascontiguousarray(matrix, dtype="<f4")
    if not np.isfinite(values).all():
        raise NonFiniteError("matrix contains NaN or infinity")
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + values.tobytes()


def read_divt_file(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_divt(fh.read())


def write_divt_file(path: str | os.PathLike, matrix: np.ndarray) -> None:
    data = write_divt(matrix)
    with open(path, "wb") as fh:
        fh.write(data)
