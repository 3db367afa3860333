"""True/proxy metric computations for classification and regression scenes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DegenerateInputError, InputError

CLASSIFICATION_METRICS = ("roc_auc", "acc", "recall", "precision", "f1", "pr_auc")
REGRESSION_METRICS = ("rmse", "r2", "mae", "mape", "mse")

_MAPE_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricVector:
    """Named metric values for one evaluation; kind is "classification" or
    "regression"."""

    kind: str
    values: Mapping[str, float]

    def __post_init__(self):
        names = CLASSIFICATION_METRICS if self.kind == "classification" else REGRESSION_METRICS
        if self.kind not in ("classification", "regression"):
            raise InputError(f"unknown metric kind {self.kind!r}")
        if tuple(self.values.keys()) != names:
            raise InputError(f"metric names must be {names} in order")

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @property
    def names(self) -> tuple:
        return tuple(self.values.keys())

    def as_array(self) -> np.ndarray:
        return np.array([self.values[k] for k in self.names], dtype=np.float64)

    def to_json(self) -> dict:
        return dict(self.values)


def _validate_pair(a, b) -> tuple:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise DegenerateInputError("empty input")
    if a.size != b.size:
        raise InputError(f"length mismatch: {a.size} vs {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("inputs must be finite")
    return a, b


def _validate_labels(labels: np.ndarray) -> np.ndarray:
    uniq = np.unique(labels)
    if not np.all(np.isin(uniq, (0.0, 1.0))):
        raise InputError("labels must be binary 0/1")
    return labels


def _midranks(x: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties sharing their midrank."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties at 1/2."""
    scores, labels = _validate_pair(scores, labels)
    _validate_labels(labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("roc_auc needs both classes present")
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1.0].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels) -> float:
    """Step-interpolated area under the precision-recall curve."""
    scores, labels = _validate_pair(scores, labels)
    _validate_labels(labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DegenerateInputError("pr_auc needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    # Evaluate only at the last index of each tied score block.
    block_end = np.ones(s.size, dtype=bool)
    block_end[:-1] = s[1:] != s[:-1]
    tp = tp[block_end]
    fp = fp[block_end]
    recall = tp / n_pos
    precision = tp / (tp + fp)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


def classification_summary(scores, labels, threshold: float = 0.5) -> MetricVector:
    """Confusion-matrix metrics at the given threshold plus the two ranking
    areas; precision over an empty positive-prediction set is 0."""
    scores, labels = _validate_pair(scores, labels)
    _validate_labels(labels)
    auc = roc_auc(scores, labels)
    ap = pr_auc(scores, labels)
    pred = scores >= threshold
    pos = labels == 1.0
    tp = float(np.sum(pred & pos))
    fp = float(np.sum(pred & ~pos))
    fn = float(np.sum(~pred & pos))
    n_pos = tp + fn
    if n_pos == 0:
        raise DegenerateInputError("recall undefined without positive labels")
    acc = float(np.mean(pred == pos))
    recall = tp / n_pos
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return MetricVector(
        "classification",
        {
            "roc_auc": auc,
            "acc": acc,
            "recall": recall,
            "precision": precision,
            "f1": f1,
            "pr_auc": ap,
        },
    )


def regression_summary(preds, targets) -> MetricVector:
    """Standard regression errors; entries with |target| < 1e-12 are skipped
    for MAPE."""
    preds, targets = _validate_pair(preds, targets)
    err = preds - targets
    mse = float(np.mean(err**2))
    rmse = float(np.sqrt(mse))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((targets - targets.mean()) ** 2))
    if ss_tot <= 0.0:
        raise DegenerateInputError("r2 undefined for zero-variance targets")
    r2 = 1.0 - float(np.sum(err**2)) / ss_tot
    keep = np.abs(targets) >= _MAPE_FLOOR
    if not keep.any():
        raise DegenerateInputError("mape undefined: all targets near zero")
    mape = float(np.mean(np.abs(err[keep] / targets[keep])))
    return MetricVector(
        "regression",
        {"rmse": rmse, "r2": r2, "mae": mae, "mape": mape, "mse": mse},
    )


def summarize(scores, targets, kind: str, threshold: float = 0.5) -> MetricVector:
    """Dispatch to the summary matching the scene kind."""
    if kind == "classification":
        return classification_summary(scores, targets, threshold)
    if kind == "regression":
        return regression_summary(scores, targets)
    raise InputError(f"unknown metric kind {kind!r}")


def summarize_lenient(scores, targets, kind: str, threshold: float = 0.5) -> np.ndarray:
    """Metric values in canonical order with NaN wherever a metric is
    undefined on this data (single-class labels, zero-variance targets,
    single rows); used for per-metric fold averaging."""
    scores, targets = _validate_pair(scores, targets)
    if kind == "classification":
        _validate_labels(targets)
        pred = scores >= threshold
        pos = targets == 1.0
        tp = float(np.sum(pred & pos))
        fp = float(np.sum(pred & ~pos))
        fn = float(np.sum(~pred & pos))
        n_pos = tp + fn
        acc = float(np.mean(pred == pos))
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / n_pos if n_pos > 0 else np.nan
        if np.isnan(recall):
            f1 = np.nan
        else:
            f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        try:
            auc = roc_auc(scores, targets)
        except DegenerateInputError:
            auc = np.nan
        try:
            ap = pr_auc(scores, targets)
        except DegenerateInputError:
            ap = np.nan
        return np.array([auc, acc, recall, precision, f1, ap])
    if kind == "regression":
        err = scores - targets
        mse = float(np.mean(err**2))
        rmse = float(np.sqrt(mse))
        mae = float(np.mean(np.abs(err)))
        ss_tot = float(np.sum((targets - targets.mean()) ** 2))
        r2 = 1.0 - float(np.sum(err**2)) / ss_tot if ss_tot > 0.0 else np.nan
        keep = np.abs(targets) >= _MAPE_FLOOR
        mape = float(np.mean(np.abs(err[keep] / targets[keep]))) if keep.any() else np.nan
        return np.array([rmse, r2, mae, mape, mse])
    raise InputError(f"unknown metric kind {kind!r}")


def metric_names(kind: str) -> tuple:
    return CLASSIFICATION_METRICS if kind == "classification" else REGRESSION_METRICS


def metric_range(name: str):
    """Closed range of a metric, or None when unbounded."""
    if name in CLASSIFICATION_METRICS:
        return (0.0, 1.0)
    return None
