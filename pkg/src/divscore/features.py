"""Model-free per-sample feature vectors.

Two extractors: raw pixels scaled to [0, 1], and a histogram-of-oriented-
gradients descriptor with the classic detector defaults (8-px cells,
9 unsigned orientation bins, 2×2-cell blocks, L2 block normalization).
Both are pure functions of the image stack, so disjoint sample ranges can
be extracted concurrently and concatenated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOURCE_TAGS = ("pixel", "hog", "external")


@dataclass(frozen=True)
class FeatureMatrix:
    """(n, d) matrix of per-sample features plus where they came from."""

    values: np.ndarray
    source_tag: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"expected a nonempty (n, d) matrix, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature matrix contains non-finite values")
        if self.source_tag not in SOURCE_TAGS:
            raise ValueError(f"source_tag must be one of {SOURCE_TAGS}, got {self.source_tag!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def pixel_features(stack: np.ndarray) -> FeatureMatrix:
    """Flatten each image to a row, scaled to [0, 1] by dividing by 255."""
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise ValueError(f"expected an (n, h, w) stack, got shape {stack.shape}")
    flat = stack.reshape(stack.shape[0], -1).astype(np.float64) / 255.0
    return FeatureMatrix(values=flat, source_tag="pixel")


def _pad_to_cell_multiple(image: np.ndarray, cell: int, min_cells: int = 1) -> np.ndarray:
    """Zero-pad symmetrically to a multiple of cell, at least min_cells cells."""
    h, w = image.shape
    ph = max(-(-h // cell), min_cells) * cell - h
    pw = max(-(-w // cell), min_cells) * cell - w
    top, left = ph // 2, pw // 2
    return np.pad(image, ((top, ph - top), (left, pw - left)))


def _gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences with replicate borders: (gy, gx)."""
    padded = np.pad(image, 1, mode="edge")
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    return gy, gx


def cell_histograms(image: np.ndarray, cell: int = 8, bins: int = 9, min_cells: int = 1) -> np.ndarray:
    """Per-cell orientation histograms of one image: (cells_y, cells_x, bins).

    Orientations are unsigned (0–180°) with a horizontal gradient mapped to
    90°, so a vertical step edge votes into the 90° bin. Each pixel's
    magnitude is split linearly between the two nearest bin centers at
    (i + 0.5)·(180/bins) degrees, wrapping around at 180°.
    """
    image = np.asarray(image, dtype=np.float64) / 255.0
    image = _pad_to_cell_multiple(image, cell, min_cells=min_cells)
    gy, gx = _gradients(image)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gx, gy)) % 180.0

    width = 180.0 / bins
    position = angle / width - 0.5
    lower = np.floor(position)
    upper_weight = position - lower
    lower_bin = lower.astype(np.int64) % bins
    upper_bin = (lower_bin + 1) % bins

    h, w = image.shape
    cells_y, cells_x = h // cell, w // cell
    cy = np.arange(h) // cell
    cx = np.arange(w) // cell
    cell_index = (cy[:, None] * cells_x + cx[None, :]).ravel()

    hist = np.zeros((cells_y * cells_x, bins), dtype=np.float64)
    np.add.at(hist, (cell_index, lower_bin.ravel()), (magnitude * (1.0 - upper_weight)).ravel())
    np.add.at(hist, (cell_index, upper_bin.ravel()), (magnitude * upper_weight).ravel())
    return hist.reshape(cells_y, cells_x, bins)


def hog_dim(height: int, width: int, cell: int = 8, bins: int = 9, block: int = 2) -> int:
    """Descriptor length for one image: (cells_y−block+1)(cells_x−block+1)·block²·bins.

    Images are padded to at least block cells per dimension, so the
    descriptor is never empty.
    """
    cells_y = max(-(-height // cell), block)
    cells_x = max(-(-width // cell), block)
    return (cells_y - block + 1) * (cells_x - block + 1) * block * block * bins


def hog_features(
    stack: np.ndarray,
    cell: int = 8,
    bins: int = 9,
    block: int = 2,
    eps: float = 1e-6,
) -> FeatureMatrix:
    """Histogram-of-oriented-gradients descriptor per image.

    Overlapping block×block groups of cells, stride one cell, each block
    vector L2-normalized as v/√(‖v‖² + eps²); rows concatenate the block
    vectors in row-major block order.
    """
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise ValueError(f"expected an (n, h, w) stack, got shape {stack.shape}")
    n = stack.shape[0]
    rows = np.empty((n, hog_dim(stack.shape[1], stack.shape[2], cell, bins, block)))
    for i in range(n):
        hist = cell_histograms(stack[i], cell=cell, bins=bins, min_cells=block)
        cells_y, cells_x = hist.shape[:2]
        blocks = []
        for by in range(cells_y - block + 1):
            for bx in range(cells_x - block + 1):
                v = hist[by : by + block, bx : bx + block, :].ravel()
                blocks.append(v / np.sqrt(v @ v + eps * eps))
        rows[i] = np.concatenate(blocks)
    return FeatureMatrix(values=rows, source_tag="hog")
