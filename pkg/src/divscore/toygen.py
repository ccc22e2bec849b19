"""Synthetic handwritten-digit generator with controlled perturbations.

Draws 28x28 digit-like glyphs from polyline templates, applies simple
morphological perturbations (thinning, thickening, fractures, swelling),
and attaches captions plus shape measurements, so the whole measurement
pipeline can run end to end without downloading any dataset. When real
digit IDX files are available they slot into the same downstream path;
the perturbations here are simplified re-implementations of the usual
morphological variants, not a faithful reproduction of any particular
dataset's generation code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from divscore.dataio import (
    DatasetTable,
    TableSchema,
    format_scenario_config,
    save_table,
    save_texts_jsonl,
    write_idx_images,
)

IMAGE_SIZE = 28
FOREGROUND_THRESHOLD = 128

KINDS = ("plain", "thin", "thick", "fracture", "swelling")

_ADJECTIVES = {
    "plain": "plain",
    "thin": "thin",
    "thick": "thick",
    "fracture": "fractured",
    "swelling": "swollen",
}

_DIGIT_WORDS = (
    "zero", "one", "two", "three", "four",
    "five", "six", "seven", "eight", "nine",
)

# Declared perturbation constants (simplified stand-ins, see module docstring).
FRACTURE_MAX_CUTS = 2       # background segments per image
FRACTURE_LENGTH = 6.0       # px
FRACTURE_WIDTH = 2.0        # px
SWELLING_RADIUS = 7.0       # px

_STROKE_RADIUS = 1.4        # px; intensity ramps to zero one px further out
_MARGIN = 3                 # px of guaranteed background around each glyph

METADATA_COLUMNS = ("area", "length", "thickness", "slant", "width", "height")

# Digit skeletons as polylines in a unit box (x right, y down). Each glyph
# is jittered and affinely perturbed before rendering, so these are only
# the central tendency of each class.
_TEMPLATES: dict[int, list[list[tuple[float, float]]]] = {
    0: [[(0.50, 0.10), (0.75, 0.20), (0.80, 0.50), (0.75, 0.80), (0.50, 0.90),
         (0.25, 0.80), (0.20, 0.50), (0.25, 0.20), (0.50, 0.10)]],
    1: [[(0.35, 0.25), (0.50, 0.10), (0.50, 0.90)]],
    2: [[(0.25, 0.25), (0.40, 0.10), (0.65, 0.12), (0.75, 0.30), (0.60, 0.55),
         (0.35, 0.75), (0.25, 0.90), (0.75, 0.90)]],
    3: [[(0.25, 0.15), (0.60, 0.10), (0.75, 0.28), (0.55, 0.48), (0.75, 0.68),
         (0.60, 0.88), (0.25, 0.85)]],
    4: [[(0.60, 0.90), (0.60, 0.10), (0.20, 0.60), (0.80, 0.60)]],
    5: [[(0.75, 0.10), (0.30, 0.10), (0.27, 0.45), (0.60, 0.42), (0.78, 0.62),
         (0.68, 0.85), (0.30, 0.90)]],
    6: [[(0.65, 0.10), (0.40, 0.30), (0.28, 0.60), (0.35, 0.85), (0.60, 0.90),
         (0.72, 0.70), (0.60, 0.52), (0.35, 0.58)]],
    7: [[(0.20, 0.12), (0.80, 0.12), (0.45, 0.90)]],
    8: [[(0.50, 0.12), (0.70, 0.25), (0.62, 0.45), (0.50, 0.50), (0.38, 0.45),
         (0.30, 0.25), (0.50, 0.12)],
        [(0.50, 0.50), (0.70, 0.62), (0.65, 0.85), (0.50, 0.90), (0.35, 0.85),
         (0.30, 0.62), (0.50, 0.50)]],
    9: [[(0.68, 0.35), (0.55, 0.50), (0.35, 0.42), (0.30, 0.22), (0.45, 0.10),
         (0.65, 0.15), (0.68, 0.35), (0.60, 0.65), (0.50, 0.90)]],
}


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown perturbation kind {kind!r}; expected one of {KINDS}")
    return kind


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each (x, y) point to the segment a-b."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        t = np.zeros(len(points))
    else:
        t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    offsets = points - (a + t[:, None] * ab)
    return np.hypot(offsets[:, 0], offsets[:, 1])


def _pixel_centers(shape: tuple[int, int]) -> np.ndarray:
    rows, cols = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    return np.column_stack([cols.ravel(), rows.ravel()]).astype(np.float64)


def _render_polylines(polylines: list[np.ndarray], size: int = IMAGE_SIZE) -> np.ndarray:
    points = _pixel_centers((size, size))
    dist = np.full(size * size, np.inf)
    for poly in polylines:
        for a, b in zip(poly[:-1], poly[1:]):
            dist = np.minimum(dist, _segment_distance(points, a, b))
    level = np.clip(_STROKE_RADIUS + 1.0 - dist, 0.0, 1.0)
    return np.round(level.reshape(size, size) * 255.0).astype(np.uint8)


def _jittered_template(label: int, rng: np.random.Generator) -> list[np.ndarray]:
    angle = rng.uniform(-0.12, 0.12)
    scale = rng.uniform(0.90, 1.08)
    shift = rng.uniform(-0.04, 0.04, size=2)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    span = IMAGE_SIZE - 2 * _MARGIN
    jittered = []
    for poly in _TEMPLATES[label]:
        pts = np.asarray(poly, dtype=np.float64)
        pts = pts + rng.normal(0.0, 0.02, size=pts.shape)
        pts = (pts - 0.5) @ rot.T * scale + 0.5 + shift
        jittered.append(_MARGIN + pts * span)
    return jittered


def base_glyphs(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` digit-like glyphs, cycling through the 10 classes.

    Returns a (n, 28, 28) uint8 stack and int64 labels. Each glyph gets its
    own generator seeded from (seed, index), so stacks are deterministic
    and individual samples could be drawn independently.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    images = np.empty((n, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    labels = np.arange(n, dtype=np.int64) % 10
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        images[i] = _render_polylines(_jittered_template(int(labels[i]), rng))
    return images, labels


def _foreground_coords(image: np.ndarray) -> np.ndarray:
    coords = np.argwhere(image >= FOREGROUND_THRESHOLD)
    if len(coords) == 0:
        raise ValueError("empty foreground: no pixel reaches the binarization threshold")
    return coords


def _cross_filter(image: np.ndarray, op) -> np.ndarray:
    """Apply min/max over the 3x3 cross neighbourhood (background border)."""
    padded = np.pad(image, 1, mode="constant", constant_values=0)
    h, w = image.shape
    out = image.copy()
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        out = op(out, padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w])
    return out


def _bilinear_sample(image: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = image.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    img = image.astype(np.float64)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _fracture(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    coords = _foreground_coords(image)
    out = image.copy()
    points = _pixel_centers(image.shape)
    n_cuts = int(rng.integers(1, FRACTURE_MAX_CUTS + 1))
    for _ in range(n_cuts):
        row, col = coords[rng.integers(len(coords))]
        theta = rng.uniform(0.0, np.pi)
        half = 0.5 * FRACTURE_LENGTH * np.array([np.cos(theta), np.sin(theta)])
        center = np.array([col, row], dtype=np.float64)
        dist = _segment_distance(points, center - half, center + half)
        out[dist.reshape(image.shape) <= 0.5 * FRACTURE_WIDTH] = 0
    return out


def _swell(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    coords = _foreground_coords(image)
    row, col = coords[rng.integers(len(coords))]
    rows, cols = np.meshgrid(
        np.arange(image.shape[0]), np.arange(image.shape[1]), indexing="ij"
    )
    dy = rows.astype(np.float64) - row
    dx = cols.astype(np.float64) - col
    radius = np.hypot(dy, dx)
    inside = radius < SWELLING_RADIUS
    # Outward push: a pixel at radius r shows the source at radius r^2/R,
    # so strokes near the centre are magnified; the field is identity at
    # the rim, keeping the boundary seamless.
    factor = np.where(inside, radius / SWELLING_RADIUS, 1.0)
    sampled = _bilinear_sample(image, row + dy * factor, col + dx * factor)
    out = image.astype(np.float64)
    out[inside] = sampled[inside]
    return np.round(np.clip(out, 0.0, 255.0)).astype(np.uint8)


def perturb(image: np.ndarray, kind: str, seed: int) -> np.ndarray:
    """Apply one perturbation; deterministic per (image, kind, seed).

    thin/thick are a single grayscale erosion/dilation with the 3x3 cross;
    fracture blanks up to 2 short background segments across random stroke
    points; swelling magnifies a disc of radius 7 around a random stroke
    point with bilinear resampling; plain is the identity.
    """
    _check_kind(kind)
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError(f"expected a 2-D uint8 image, got {image.dtype} {image.shape}")
    _foreground_coords(image)
    if kind == "plain":
        return image.copy()
    rng = np.random.default_rng(seed)
    if kind == "thin":
        return _cross_filter(image, np.minimum)
    if kind == "thick":
        return _cross_filter(image, np.maximum)
    if kind == "fracture":
        return _fracture(image, rng)
    return _swell(image, rng)


def caption(label: int, kind: str) -> str:
    """Caption such as ``Image of a handwritten plain seven``."""
    _check_kind(kind)
    if not 0 <= int(label) <= 9:
        raise ValueError(f"label must be in [0, 9], got {label}")
    return f"Image of a handwritten {_ADJECTIVES[kind]} {_DIGIT_WORDS[int(label)]}"


def _thinning_pass(img: np.ndarray, step: int) -> np.ndarray:
    """One parallel subiteration of classic iterative thinning."""
    p = np.pad(img, 1)
    # Clockwise 8-neighbourhood starting at north.
    ring = [
        p[:-2, 1:-1], p[:-2, 2:], p[1:-1, 2:], p[2:, 2:],
        p[2:, 1:-1], p[2:, :-2], p[1:-1, :-2], p[:-2, :-2],
    ]
    ring = [r.astype(np.int64) for r in ring]
    neighbours = sum(ring)
    transitions = sum(
        ((ring[i] == 0) & (ring[(i + 1) % 8] == 1)).astype(np.int64)
        for i in range(8)
    )
    north, east, south, west = ring[0], ring[2], ring[4], ring[6]
    if step == 0:
        keep_free = (north * east * south == 0) & (east * south * west == 0)
    else:
        keep_free = (north * east * west == 0) & (north * south * west == 0)
    remove = (
        (img == 1)
        & (neighbours >= 2) & (neighbours <= 6)
        & (transitions == 1)
        & keep_free
    )
    if remove.any():
        img = img.copy()
        img[remove] = 0
    return img


def _skeletonize(mask: np.ndarray) -> np.ndarray:
    img = mask.astype(np.uint8)
    while True:
        before = img
        img = _thinning_pass(img, 0)
        img = _thinning_pass(img, 1)
        if np.array_equal(img, before):
            return img.astype(bool)


@dataclass(frozen=True)
class Morphometrics:
    """Shape measurements of one glyph (pixel units, slant in radians)."""

    area: float
    length: float
    thickness: float
    slant: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if not self.area >= self.length >= 0:
            raise ValueError(f"need area >= length >= 0, got {self.area}, {self.length}")

    def as_row(self) -> np.ndarray:
        return np.array(
            [self.area, self.length, self.thickness, self.slant, self.width, self.height],
            dtype=np.float64,
        )


def morphometrics(image: np.ndarray) -> Morphometrics:
    """Measure area, skeleton length, thickness, slant, and bounding box.

    Thickness is area over skeleton length. Slant is atan(-mu11 / mu02) of
    the central second moments with rows growing downward, so a glyph whose
    top leans to the right has positive slant.
    """
    coords = _foreground_coords(np.asarray(image))
    mask = np.asarray(image) >= FOREGROUND_THRESHOLD
    area = float(mask.sum())
    length = float(_skeletonize(mask).sum())
    rows = coords[:, 0].astype(np.float64)
    cols = coords[:, 1].astype(np.float64)
    dy = rows - rows.mean()
    dx = cols - cols.mean()
    mu11 = float(np.mean(dx * dy))
    mu02 = float(np.mean(dy * dy))
    return Morphometrics(
        area=area,
        length=length,
        thickness=area / length,
        slant=float(np.arctan2(-mu11, mu02)),
        width=float(coords[:, 1].max() - coords[:, 1].min() + 1),
        height=float(coords[:, 0].max() - coords[:, 0].min() + 1),
    )


@dataclass(frozen=True)
class ToyDataset:
    """A generated image stack plus its table, schema, and scenario config."""

    images: np.ndarray
    table: DatasetTable
    schema: TableSchema
    config_text: str


def build_scenarios(n_per_kind: int, seed: int) -> ToyDataset:
    """Generate 5 perturbation pools over shared base glyphs plus 4 unions.

    Each of ``n_per_kind`` base glyphs appears once per perturbation kind;
    group ids tie the variants of one glyph together so resampling keeps
    them in the same split. The scenario config declares one scenario per
    kind and the four plain+variant unions, with plain as the reference.
    """
    if n_per_kind < 10:
        raise ValueError(f"need n_per_kind >= 10, got {n_per_kind}")
    bases, base_labels = base_glyphs(n_per_kind, seed)

    total = len(KINDS) * n_per_kind
    images = np.empty((total, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    sample_ids: list[str] = []
    group_ids: list[str] = []
    labels = np.empty(total, dtype=np.int64)
    metadata = np.empty((total, len(METADATA_COLUMNS)), dtype=np.float64)
    texts: list[str | None] = []
    kinds_column: list[str] = []

    i = 0
    for k, kind in enumerate(KINDS):
        for b in range(n_per_kind):
            child_seed = int(np.random.SeedSequence((seed, k, b)).generate_state(1)[0])
            images[i] = perturb(bases[b], kind, child_seed)
            metadata[i] = morphometrics(images[i]).as_row()
            sample_ids.append(f"{kind}_{b:05d}")
            group_ids.append(f"glyph_{b:05d}")
            labels[i] = base_labels[b]
            texts.append(caption(int(base_labels[b]), kind))
            kinds_column.append(kind)
            i += 1

    schema = TableSchema(metadata=METADATA_COLUMNS, tags=("perturbation",))
    table = DatasetTable(
        sample_ids=sample_ids,
        labels=labels,
        group_ids=group_ids,
        metadata=metadata,
        image_index=list(range(total)),
        texts=texts,
        tags={"perturbation": kinds_column},
        metadata_columns=METADATA_COLUMNS,
    )
    scenarios = [(kind, {"perturbation": [kind]}) for kind in KINDS]
    scenarios += [
        (f"plain_{kind}", {"perturbation": ["plain", kind]})
        for kind in KINDS
        if kind != "plain"
    ]
    config_text = format_scenario_config(scenarios, reference="plain")
    return ToyDataset(images=images, table=table, schema=schema, config_text=config_text)


def write_dataset(out_dir: str | Path, dataset: ToyDataset) -> dict[str, Path]:
    """Write the stack, table, captions, schema, and scenario config files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "images": out / "images.idx",
        "table": out / "table.csv",
        "texts": out / "captions.jsonl",
        "scenarios": out / "scenarios.cfg",
        "schema": out / "schema.json",
    }
    paths["images"].write_bytes(write_idx_images(dataset.images))
    save_table(paths["table"], dataset.table, dataset.schema)
    save_texts_jsonl(paths["texts"], dataset.table)
    paths["scenarios"].write_text(dataset.config_text, encoding="utf-8")
    paths["schema"].write_text(json.dumps(dataset.schema.to_json(), indent=1), encoding="utf-8")
    return paths
