"""DIVT encoder: the little-endian 2-D float32 tensor exchange format.

Layout:

    4 bytes | magic "DIVT"
    u32 LE  | version, currently 1
    u64 LE  | rows
    u64 LE  | cols
    f32 LE  | rows * cols values, row-major

This is the component boundary: the exporter writes the format, the
consuming toolkit reads it.  The encoder is self-contained on purpose —
an independent implementation of the documented layout, kept honest by
cross-codec round-trip tests rather than by a shared import.
"""

from __future__ import annotations

import struct

import numpy as np

from divexport.errors import ExportError

MAGIC = b"DIVT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_divt(matrix: np.ndarray) -> bytes:
    """Encode a 2-D real matrix as DIVT bytes (values stored as float32)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ExportError(f"matrix must be 2-D, got shape {matrix.shape}")
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        raise ExportError(f"empty tensor: {rows}x{cols}")
    values = np.ascontiguousarray(matrix, dtype="<f4")
    if not np.isfinite(values).all():
        raise ExportError("matrix contains NaN or infinity")
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + values.tobytes()
