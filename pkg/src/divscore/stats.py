"""Rankings, rank correlation, and classifier evaluation.

All functions are pure. Ties everywhere use average ranks, the tie-safe
convention, because real metric tables do contain exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from divscore.divmetrics import HIGHER_BETTER, direction_of


@dataclass(frozen=True)
class RankingMatrix:
    """rank[m][s]: 1 = best scenario under metric m's direction."""

    metrics: list[str]
    scenarios: list[str]
    ranks: np.ndarray  # (M, S)

    def row(self, metric: str) -> np.ndarray:
        return self.ranks[self.metrics.index(metric)]


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Spearman correlations; NaN marks an undefined (absent) entry."""

    metrics: list[str]
    values: np.ndarray  # (M, M), symmetric, unit diagonal


def average_ranks(values: np.ndarray, descending: bool = False) -> np.ndarray:
    """Ranks 1…n with ties sharing their average rank."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty vector, got shape {v.shape}")
    if descending:
        v = -v
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_scenarios(
    values: dict[str, dict[str, float]],
    scenarios: list[str],
    directions: dict[str, str] | None = None,
) -> RankingMatrix:
    """Rank scenarios per metric, best first under the metric's direction.

    Metrics missing a value for some scenario are dropped row-wise; a
    metric with no values at all is an error. ``values`` is the
    metric → scenario → value grid a ScenarioReport emits.
    """
    kept: list[str] = []
    rows: list[np.ndarray] = []
    for metric, cells in values.items():
        present = [s for s in scenarios if s in cells]
        if not present:
            raise ValueError(f"metric {metric!r} has no value for any scenario")
        if len(present) < len(scenarios):
            continue
        direction = (directions or {}).get(metric) or direction_of(metric)
        row = average_ranks(
            np.array([cells[s] for s in scenarios], dtype=np.float64),
            descending=direction == HIGHER_BETTER,
        )
        kept.append(metric)
        rows.append(row)
    if not kept:
        raise ValueError("no metric is present for every scenario")
    return RankingMatrix(metrics=kept, scenarios=list(scenarios), ranks=np.vstack(rows))


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson on average-ranked values."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError(f"need two equal-length vectors of size ≥ 2, got {x.shape} and {y.shape}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ValueError("spearman undefined for constant input")
    return float(dx @ dy / np.sqrt(sx * sy))


def correlation_matrix(ranking: RankingMatrix) -> CorrelationMatrix:
    """Spearman correlation between every pair of metric rank rows.

    Constant rank rows make a pair undefined; those entries are NaN
    (absent), never 0. The diagonal is 1 regardless.
    """
    m = len(ranking.metrics)
    if m < 2:
        raise ValueError(f"need at least 2 metrics, got {m}")
    out = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            try:
                rho = spearman(ranking.ranks[i], ranking.ranks[j])
            except ValueError:
                rho = np.nan
            out[i, j] = out[j, i] = rho
    return CorrelationMatrix(metrics=list(ranking.metrics), values=out)


def auc(scores, labels) -> float:
    """Mann–Whitney AUC: (#concordant + 0.5·#tied) / (n₊·n₋), via midranks."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"scores and labels must be equal-length vectors, got {s.shape} and {y.shape}")
    positive = y == 1
    n_pos = int(positive.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"need both classes, got {n_pos} positives and {n_neg} negatives")
    ranks = average_ranks(s)
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# CSV exports


def ranking_to_csv(ranking: RankingMatrix) -> str:
    lines = ["metric," + ",".join(ranking.scenarios)]
    for metric, row in zip(ranking.metrics, ranking.ranks):
        lines.append(metric + "," + ",".join(f"{r:g}" for r in row))
    return "\n".join(lines) + "\n"


def correlation_to_csv(cm: CorrelationMatrix) -> str:
    lines = ["," + ",".join(cm.metrics)]
    for metric, row in zip(cm.metrics, cm.values):
        cells = ["" if np.isnan(v) else f"{v:.6g}" for v in row]
        lines.append(metric + "," + ",".join(cells))
    return "\n".join(lines) + "\n"
