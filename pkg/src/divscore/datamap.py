"""Training-dynamics data maps and subgroup density surfaces.

A data-map point summarizes one sample's per-epoch probability of its
true class: confidence is the mean across epochs, variability the
population standard deviation. Subgroup density surfaces (product
Gaussian KDE on a fixed 100×100 grid over confidence × variability)
expose subgroups the classifier treats abnormally; a median/IQR rule
turns the visual "stands out" judgement into a reproducible flag.

The module is agnostic about where the probability log came from — the
built-in trainer or any external one speaking the same CSV format.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from divscore.trainer import EpochProbLog

GRID_SIZE = 100
CONF_RANGE = (0.0, 1.0)
VAR_RANGE = (0.0, 0.5)
BANDWIDTH_FLOOR = 1e-3


@dataclass(frozen=True)
class DataMapPoint:
    sample_id: str
    confidence: float  # mean p(true class) across epochs
    variability: float  # population std of p(true class) across epochs
    subgroup_tags: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"{self.sample_id}: confidence {self.confidence} out of [0, 1]")
        if not 0.0 <= self.variability <= 0.5 + 1e-12:
            raise ValueError(f"{self.sample_id}: variability {self.variability} out of [0, 0.5]")

    def tag(self, name: str) -> str:
        for key, value in self.subgroup_tags:
            if key == name:
                return value
        raise KeyError(f"point {self.sample_id} has no tag {name!r}")


@dataclass(frozen=True)
class DensityGrid:
    """KDE evaluated on the fixed grid; density[i, j] = (confidence i, variability j)."""

    density: np.ndarray  # (GRID_SIZE, GRID_SIZE), nonnegative
    bandwidth: tuple[float, float]  # (confidence axis, variability axis)

    def __post_init__(self) -> None:
        d = np.asarray(self.density, dtype=np.float64)
        if d.shape != (GRID_SIZE, GRID_SIZE):
            raise ValueError(f"grid shape {d.shape} != ({GRID_SIZE}, {GRID_SIZE})")
        if d.min() < 0.0:
            raise ValueError("densities must be nonnegative")


def confidence_centers() -> np.ndarray:
    lo, hi = CONF_RANGE
    return lo + (np.arange(GRID_SIZE) + 0.5) * (hi - lo) / GRID_SIZE


def variability_centers() -> np.ndarray:
    lo, hi = VAR_RANGE
    return lo + (np.arange(GRID_SIZE) + 0.5) * (hi - lo) / GRID_SIZE


def cell_area() -> float:
    return ((CONF_RANGE[1] - CONF_RANGE[0]) / GRID_SIZE) * (
        (VAR_RANGE[1] - VAR_RANGE[0]) / GRID_SIZE
    )


def datamap_stats(
    log: EpochProbLog | dict[str, np.ndarray],
    tags_by_id: dict[str, dict[str, str]] | None = None,
) -> list[DataMapPoint]:
    """One point per tracked sample: (mean, population std) across epochs."""
    if isinstance(log, EpochProbLog):
        if log.probs.shape[0] == 0:
            raise ValueError("empty probability log: no completed epochs")
        series = {sid: log.probs[:, j] for j, sid in enumerate(log.tracked_ids)}
    else:
        series = log
        if not series or any(len(v) == 0 for v in series.values()):
            raise ValueError("empty probability log: every sample needs ≥ 1 epoch")
    points = []
    for sid, values in series.items():
        v = np.asarray(values, dtype=np.float64)
        tags = tuple(sorted((tags_by_id or {}).get(sid, {}).items()))
        points.append(
            DataMapPoint(
                sample_id=sid,
                confidence=float(v.mean()),
                variability=float(v.std()),  # population: divide by E
                subgroup_tags=tags,
            )
        )
    return points


def subgroup_maps(points: list[DataMapPoint], tag_name: str) -> dict[str, list[DataMapPoint]]:
    """Partition points by one tag's value; every point must carry the tag."""
    out: dict[str, list[DataMapPoint]] = {}
    for point in points:
        try:
            value = point.tag(tag_name)
        except KeyError:
            raise ValueError(f"tag {tag_name!r} missing on point {point.sample_id}") from None
        out.setdefault(value, []).append(point)
    return out


def density_grid(points: list[DataMapPoint]) -> DensityGrid:
    """Product Gaussian KDE over (confidence, variability) on the fixed grid.

    Per-axis bandwidth is Scott's rule n^(−1/6)·σ_axis with a 1e-3 floor,
    so identical points yield a single spike rather than an error.
    """
    if not points:
        raise ValueError("need at least 1 point for a density grid")
    conf = np.array([p.confidence for p in points])
    var = np.array([p.variability for p in points])
    n = conf.size
    scott = n ** (-1.0 / 6.0)
    h_c = max(scott * float(conf.std()), BANDWIDTH_FLOOR)
    h_v = max(scott * float(var.std()), BANDWIDTH_FLOOR)

    def axis_kernel(centers: np.ndarray, samples: np.ndarray, h: float) -> np.ndarray:
        z = (centers[:, None] - samples[None, :]) / h
        return np.exp(-0.5 * z * z) / (h * np.sqrt(2.0 * np.pi))

    a = axis_kernel(confidence_centers(), conf, h_c)  # (G, n)
    b = axis_kernel(variability_centers(), var, h_v)  # (G, n)
    density = a @ b.T / n
    return DensityGrid(density=density, bandwidth=(h_c, h_v))


def flag_outlier_subgroups(
    points: list[DataMapPoint], tag_name: str, threshold: float = 1.5
) -> list[str]:
    """Subgroup values whose median confidence falls far below the rest.

    A value is flagged when its median confidence is strictly below
    (global median − threshold · global IQR). The rule is a declared
    operationalization of "this subgroup stands out", not a universal
    outlier test.
    """
    groups = subgroup_maps(points, tag_name)
    if len(groups) < 2:
        raise ValueError(f"need ≥ 2 subgroup values for {tag_name!r}, got {len(groups)}")
    confidences = np.array([p.confidence for p in points])
    q25, median, q75 = np.quantile(confidences, [0.25, 0.5, 0.75])
    cutoff = median - threshold * (q75 - q25)
    flagged = [
        value
        for value, members in sorted(groups.items())
        if float(np.median([p.confidence for p in members])) < cutoff
    ]
    return flagged


# ---------------------------------------------------------------------------
# CSV exports


def points_to_csv(points: list[DataMapPoint]) -> str:
    tag_names = sorted({name for p in points for name, _ in p.subgroup_tags})
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["sample_id", "confidence", "variability", *tag_names])
    for p in points:
        tags = dict(p.subgroup_tags)
        writer.writerow(
            [p.sample_id, repr(p.confidence), repr(p.variability)]
            + [tags.get(name, "") for name in tag_names]
        )
    return buf.getvalue()


def points_from_csv(text: str) -> list[DataMapPoint]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:3] != ["sample_id", "confidence", "variability"]:
        raise ValueError(f"unexpected points header {header[:3]}")
    tag_names = header[3:]
    points = []
    for row in reader:
        tags = tuple((name, value) for name, value in zip(tag_names, row[3:]) if value)
        points.append(
            DataMapPoint(
                sample_id=row[0],
                confidence=float(row[1]),
                variability=float(row[2]),
                subgroup_tags=tags,
            )
        )
    return points


def grid_to_csv(grid: DensityGrid) -> str:
    """Rows = confidence cells, columns = variability cells, centers labeled."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["confidence\\variability"] + [repr(v) for v in variability_centers()])
    for c, row in zip(confidence_centers(), grid.density):
        writer.writerow([repr(c)] + [repr(d) for d in row])
    return buf.getvalue()


def save_points_csv(path: str | os.PathLike, points: list[DataMapPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(points_to_csv(points))


def save_grid_csv(path: str | os.PathLike, grid: DensityGrid) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(grid_to_csv(grid))
