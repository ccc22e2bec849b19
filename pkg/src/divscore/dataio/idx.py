"""IDX codec for grayscale image stacks and label vectors.

Layout (all integers big-endian):

    u32   | magic: 0x00000803 for 3-D u8 images, 0x00000801 for u8 labels
    u32[] | one dimension per axis (count, height, width for images)
    u8[]  | payload, row-major, sample-major

Reading and writing are exact inverses: ``write(read(b)) == b`` for any
valid payload and ``read(write(x)) == x`` for any valid stack.
"""

from __future__ import annotations

import struct

import numpy as np

from divscore.dataio.errors import BadMagicError, DimOverflowError, TruncatedError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Declared element counts above this are treated as corrupt headers rather
# than real data; keeps a bad dim field from driving a huge allocation.
_MAX_ELEMENTS = 1 << 40


def _read_header(data: bytes, magic: int, ndim: int) -> tuple[int, ...]:
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise TruncatedError(
            f"need {header_len} header bytes, have {len(data)}"
        )
    got = struct.unpack_from(">I", data, 0)[0]
    if got != magic:
        raise BadMagicError(f"expected magic 0x{magic:08x}, found 0x{got:08x}")
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    total = 1
    for d in dims:
        total *= d
    if total > _MAX_ELEMENTS:
        raise DimOverflowError(f"declared {total} elements, limit is {_MAX_ELEMENTS}")
    payload = len(data) - header_len
    if payload < total:
        raise TruncatedError(f"payload holds {payload} bytes, dims require {total}")
    if payload > total:
        raise TruncatedError(
            f"payload holds {payload} bytes, {payload - total} past the declared dims"
        )
    return dims


def read_idx_images(data: bytes) -> np.ndarray:
    """Decode an IDX image payload into a (count, height, width) uint8 array."""
    count, height, width = _read_header(data, IMAGE_MAGIC, 3)
    if count and (height < 1 or width < 1):
        raise DimOverflowError(f"image dims must be >= 1, got {height}x{width}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, height, width).copy()


def write_idx_images(stack: np.ndarray) -> bytes:
    """Encode a (count, height, width) uint8 array as IDX bytes."""
    stack = np.ascontiguousarray(stack, dtype=np.uint8)
    if stack.ndim != 3:
        raise DimOverflowError(f"image stack must be 3-D, got shape {stack.shape}")
    count, height, width = stack.shape
    if count and (height < 1 or width < 1):
        raise DimOverflowError(f"image dims must be >= 1, got {height}x{width}")
    header = struct.pack(">IIII", IMAGE_MAGIC, count, height, width)
    return header + stack.tobytes()


def read_idx_labels(data: bytes) -> np.ndarray:
    """Decode an IDX label payload into a (count,) uint8 array."""
    (count,) = _read_header(data, LABEL_MAGIC, 1)
    return np.frombuffer(data, dtype=np.uint8, offset=8)[:count].copy()


def write_idx_labels(labels: np.ndarray) -> bytes:
    """Encode a (count,) uint8 array as IDX label bytes."""
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise DimOverflowError(f"label vector must be 1-D, got shape {labels.shape}")
    return struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()
