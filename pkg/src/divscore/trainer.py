"""Desk-scale reference classifier for the fold protocol and data maps.

Multinomial logistic regression over any feature matrix, trained with
weighted softmax cross-entropy, full-batch Adam-style updates, and early
stopping on validation AUC. The per-epoch probability-of-true-class log
it emits is the exact input of the data-map module; an external trainer
can substitute its own log through the same CSV format.

The problem is convex, weights start at zero, and batches are full, so a
run is deterministic by construction; independent folds may train
concurrently.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from divscore.resample import FoldAssignment
from divscore.stats import auc

WEIGHTING_MODES = ("none", "inverse_prevalence")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-4
    class_weighting: str = "inverse_prevalence"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError(f"patience must lie in [0, max_epochs], got {self.patience}")
        if self.class_weighting not in WEIGHTING_MODES:
            raise ValueError(f"class_weighting must be one of {WEIGHTING_MODES}")


@dataclass(frozen=True)
class LinearModel:
    """C×(d+1) weight matrix; the last column multiplies the bias input."""

    weights: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - 1


@dataclass
class EpochProbLog:
    """Per-epoch predicted probability of each tracked sample's true class."""

    tracked_ids: list[str]
    probs: np.ndarray  # (completed epochs, len(tracked_ids)) in [0, 1]
    stopped_epoch: int
    best_epoch: int

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != len(self.tracked_ids):
            raise ValueError(f"log shape {p.shape} does not match {len(self.tracked_ids)} tracked ids")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("tracked probabilities must lie in [0, 1]")
        if p.shape[0] != self.stopped_epoch:
            raise ValueError(f"{p.shape[0]} rows for {self.stopped_epoch} completed epochs")
        self.probs = p


@dataclass
class FoldResult:
    fold: int
    model: LinearModel
    val_auc: float
    best_epoch: int
    log: EpochProbLog
    train_losses: list[float] = field(default_factory=list)


@dataclass
class CVResult:
    folds: list[FoldResult]
    oof_probs: np.ndarray  # (n, C): each sample predicted by the fold that held it out

    @property
    def mean_val_auc(self) -> float:
        return float(np.mean([f.val_auc for f in self.folds]))

    def merged_log(self) -> dict[str, np.ndarray]:
        """sample_id → its per-epoch p(true class) series, across all folds."""
        merged: dict[str, np.ndarray] = {}
        for result in self.folds:
            for j, sid in enumerate(result.log.tracked_ids):
                merged[sid] = result.log.probs[:, j]
        return merged


def _as_matrix(features) -> np.ndarray:
    return np.asarray(getattr(features, "values", features), dtype=np.float64)


def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def class_weights(labels: np.ndarray, mode: str, n_classes: int) -> np.ndarray:
    """Per-class loss weights: n_max/n_c under inverse_prevalence, else 1.

    For a binary 90/10 split this puts weight 9 on the minority class —
    the negative-to-positive count ratio.
    """
    if mode not in WEIGHTING_MODES:
        raise ValueError(f"class_weighting must be one of {WEIGHTING_MODES}")
    weights = np.ones(n_classes, dtype=np.float64)
    if mode == "inverse_prevalence":
        counts = np.bincount(np.asarray(labels), minlength=n_classes).astype(np.float64)
        present = counts > 0
        weights[present] = counts.max() / counts[present]
    return weights


def loss_and_grad(
    w: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Weighted softmax cross-entropy and its analytic gradient.

    Per-sample losses are weighted by the sample's class weight and
    averaged over the total weight, so all-ones weighting is numerically
    identical to the unweighted mean.
    """
    x = _with_bias(np.asarray(features, dtype=np.float64))
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    y = np.asarray(labels)
    sample_w = np.asarray(weights, dtype=np.float64)[y]
    total = sample_w.sum()
    probs = _softmax(x @ w.T)
    p_true = np.clip(probs[np.arange(y.size), y], 1e-300, None)
    loss = float((sample_w * -np.log(p_true)).sum() / total)
    delta = probs
    delta[np.arange(y.size), y] -= 1.0
    grad = (delta * sample_w[:, None]).T @ x / total
    return loss, grad


def predict_proba(model: LinearModel, features) -> np.ndarray:
    """Class probabilities; rows sum to 1."""
    x = _as_matrix(features)
    if x.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {x.shape[1]}")
    return _softmax(_with_bias(x) @ model.weights.T)


def _validation_auc(probs: np.ndarray, labels: np.ndarray, fold_id: int) -> float:
    """Macro one-vs-rest AUC over classes with both signs in the fold."""
    values = []
    for cls in range(probs.shape[1]):
        targets = (labels == cls).astype(np.int64)
        if 0 < targets.sum() < targets.size:
            values.append(auc(probs[:, cls], targets))
    if not values:
        raise ValueError(f"fold {fold_id}: validation labels are single-class, AUC undefined")
    return float(np.mean(values))


def train_fold(
    features,
    labels: np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    config: TrainConfig,
    sample_ids: list[str] | None = None,
    tracked_idx: np.ndarray | None = None,
    fold_id: int = 0,
) -> FoldResult:
    """Train one fold; track per-epoch p(true class) on tracked_idx.

    The tracked set defaults to the validation fold, so cross-validation
    tracks every sample exactly once. Early stopping keeps the weights of
    the best validation-AUC epoch and halts after `patience` epochs
    without an improvement above min_delta.
    """
    x = _as_matrix(features)
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1
    tracked = np.asarray(val_idx if tracked_idx is None else tracked_idx, dtype=np.int64)
    tracked_ids = (
        [sample_ids[i] for i in tracked] if sample_ids is not None else [str(i) for i in tracked]
    )

    weights = class_weights(labels[train_idx], config.class_weighting, n_classes)
    w = np.zeros((n_classes, x.shape[1] + 1), dtype=np.float64)
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    best_auc = -np.inf
    best_epoch = 0
    best_w = w.copy()
    since_improve = 0
    losses: list[float] = []
    log_rows: list[np.ndarray] = []
    val_score = None

    for epoch in range(1, config.max_epochs + 1):
        loss, grad = loss_and_grad(w, x[train_idx], labels[train_idx], weights)
        losses.append(loss)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**epoch)
        v_hat = v / (1.0 - beta2**epoch)
        w = w - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        probs_tracked = _softmax(_with_bias(x[tracked]) @ w.T)
        log_rows.append(probs_tracked[np.arange(tracked.size), labels[tracked]])

        val_probs = _softmax(_with_bias(x[val_idx]) @ w.T)
        val_score = _validation_auc(val_probs, labels[val_idx], fold_id)
        if val_score > best_auc + config.min_delta:
            best_auc = val_score
            best_epoch = epoch
            best_w = w.copy()
            since_improve = 0
        else:
            since_improve += 1
            if since_improve > config.patience:
                break

    log = EpochProbLog(
        tracked_ids=tracked_ids,
        probs=np.vstack(log_rows),
        stopped_epoch=len(log_rows),
        best_epoch=best_epoch,
    )
    return FoldResult(
        fold=fold_id,
        model=LinearModel(weights=best_w),
        val_auc=float(best_auc),
        best_epoch=best_epoch,
        log=log,
        train_losses=losses,
    )


def train_cv(
    features,
    labels: np.ndarray,
    assignment: FoldAssignment,
    config: TrainConfig,
    sample_ids: list[str] | None = None,
) -> CVResult:
    """Train one model per fold; assemble out-of-fold probabilities."""
    x = _as_matrix(features)
    labels = np.asarray(labels)
    n_classes = int(labels.max()) + 1
    oof = np.zeros((labels.size, n_classes), dtype=np.float64)
    results = []
    for fold in range(assignment.k):
        val_idx = assignment.members(fold)
        train_idx = np.flatnonzero(assignment.fold_of != fold)
        result = train_fold(
            x, labels, train_idx, val_idx, config, sample_ids=sample_ids, fold_id=fold
        )
        oof[val_idx] = predict_proba(result.model, x[val_idx])
        results.append(result)
    return CVResult(folds=results, oof_probs=oof)


# ---------------------------------------------------------------------------
# probability-log CSV (the datamap module's input format)


def save_prob_log(path: str | os.PathLike, log: EpochProbLog) -> None:
    """Write (epoch, sample_id, p_true_class) rows, epochs 1-based."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "sample_id", "p_true_class"])
        for epoch in range(log.probs.shape[0]):
            for j, sid in enumerate(log.tracked_ids):
                writer.writerow([epoch + 1, sid, repr(float(log.probs[epoch, j]))])


def save_merged_log(path: str | os.PathLike, series: dict[str, np.ndarray]) -> None:
    """Write per-sample epoch series (fold-merged logs) in the same format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "sample_id", "p_true_class"])
        for sid, values in series.items():
            for epoch, value in enumerate(values, start=1):
                writer.writerow([epoch, sid, repr(float(value))])


def load_prob_log(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a probability-log CSV into sample_id → per-epoch series."""
    series: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["epoch", "sample_id", "p_true_class"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            if len(row) != 3:
                raise ValueError(f"{path}: malformed row {row}")
            epoch, sid, p = int(row[0]), row[1], float(row[2])
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{path}: probability {p} out of [0, 1] for {sid}")
            series.setdefault(sid, []).append((epoch, p))
    out: dict[str, np.ndarray] = {}
    for sid, pairs in series.items():
        pairs.sort()
        out[sid] = np.array([p for _, p in pairs], dtype=np.float64)
    return out
