"""Randomized selection machinery: subsampling, bootstrap, k-fold.

Every operation here is a pure function of (inputs, seed), so repeated
runs and concurrent callers see identical selections. Bootstrap replicates
use per-replicate seeds seed+r and may therefore execute concurrently.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap interval around a point estimate."""

    point: float
    lo: float
    hi: float
    reps: int
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"interval reversed: lo {self.lo} > hi {self.hi}")


@dataclass(frozen=True)
class FoldAssignment:
    """Fold id per sample; groups never span folds."""

    k: int
    fold_of: np.ndarray  # (n,) int64 in [0, k)

    def members(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_subsample(labels: np.ndarray, fraction: float = 0.10, seed: int = 0) -> np.ndarray:
    """Per-class sample without replacement, preserving class shares.

    Each class contributes round(fraction·count) indices (half rounds up),
    at least one. The result is sorted and deterministic per seed.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("cannot subsample an empty label list")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    chosen: list[np.ndarray] = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        take = max(1, _round_half_up(fraction * members.size))
        chosen.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(chosen))


def bootstrap_ci(
    statistic: Callable,
    data,
    reps: int = 10,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapCI:
    """Percentile bootstrap of a scalar statistic.

    ``data`` is anything indexable by an integer array — a feature matrix,
    or a table exposing ``subset(indices)``. Each replicate r draws n
    indices with replacement using seed+r; the interval takes the
    (1±level)/2 quantiles of the replicate statistics with linear
    interpolation. The point estimate is the statistic on the full data
    and may legitimately fall outside the interval.
    """
    if reps < 2:
        raise ValueError(f"need at least 2 bootstrap replicates, got {reps}")
    n = data.n_samples if hasattr(data, "n_samples") else len(data)
    take = data.subset if hasattr(data, "subset") else np.asarray(data).__getitem__

    point = float(statistic(take(np.arange(n))))
    values = np.empty(reps, dtype=np.float64)
    for r in range(reps):
        rep_seed = seed + r
        indices = np.random.default_rng(rep_seed).integers(0, n, size=n)
        try:
            values[r] = float(statistic(take(indices)))
        except Exception as exc:
            raise RuntimeError(f"statistic failed on bootstrap resample with seed {rep_seed}: {exc}") from exc
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha])
    return BootstrapCI(point=point, lo=float(lo), hi=float(hi), reps=reps, level=level)


def _group_sort_key(seed: int):
    def key(entry):
        gid, positives, size = entry
        digest = hashlib.blake2b(f"{seed}:{gid}".encode(), digest_size=8).hexdigest()
        return (-positives, -size, digest)

    return key


def group_stratified_kfold(
    labels: np.ndarray,
    group_ids: list[str],
    k: int = 5,
    seed: int = 0,
    positive_label: int = 1,
) -> FoldAssignment:
    """Greedy group-aware stratified folds.

    Groups are sorted by (positive count desc, size desc, seeded hash of
    id) and each goes to the fold with the fewest positives so far, ties
    broken by fewest samples, then fold index. All samples of a group land
    in one fold; the seed only perturbs the hash tie-break, never group
    integrity.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError(f"need at least 2 folds, got k={k}")
    if len(group_ids) != labels.size:
        raise ValueError(f"{len(group_ids)} group ids for {labels.size} labels")

    members: dict[str, list[int]] = {}
    for i, gid in enumerate(group_ids):
        members.setdefault(gid, []).append(i)
    if len(members) < k:
        raise ValueError(f"only {len(members)} groups for {k} folds")

    entries = [
        (gid, int(np.sum(labels[idx] == positive_label)), len(idx))
        for gid, idx in members.items()
    ]
    entries.sort(key=_group_sort_key(seed))

    fold_positives = [0] * k
    fold_sizes = [0] * k
    fold_of = np.empty(labels.size, dtype=np.int64)
    for gid, positives, size in entries:
        fold = min(range(k), key=lambda f: (fold_positives[f], fold_sizes[f], f))
        fold_positives[fold] += positives
        fold_sizes[fold] += size
        fold_of[members[gid]] = fold
    return FoldAssignment(k=k, fold_of=fold_of)


def save_fold_csv(path: str | os.PathLike, sample_ids: list[str], assignment: FoldAssignment) -> None:
    """Write the fold assignment as (sample_id, fold) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "fold"])
        for sid, fold in zip(sample_ids, assignment.fold_of):
            writer.writerow([sid, int(fold)])


def load_fold_csv(path: str | os.PathLike, sample_ids: list[str]) -> FoldAssignment:
    """Read a (sample_id, fold) CSV back into a FoldAssignment."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["sample_id", "fold"]:
            raise ValueError(f"{path}: unexpected header {header}")
        fold_by_id = {sid: int(fold) for sid, fold in reader}
    missing = [sid for sid in sample_ids if sid not in fold_by_id]
    if missing:
        raise ValueError(f"{path}: no fold for sample ids {missing[:5]}")
    fold_of = np.array([fold_by_id[sid] for sid in sample_ids], dtype=np.int64)
    return FoldAssignment(k=int(fold_of.max()) + 1, fold_of=fold_of)
