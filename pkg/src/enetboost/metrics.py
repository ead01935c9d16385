"""Binary-classification and regression evaluation metrics.

Threshold metrics come from a confusion matrix at "score >= threshold";
ratios with a zero denominator are reported as None, never coerced to 0,
so degenerate predictions cannot silently win a tuner comparison.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion matrix cells must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricBlock:
    """Evaluation metrics; None marks an undefined (0/0) value."""

    accuracy: float | None = None
    precision: float | None = None
    recall: float | None = None
    specificity: float | None = None
    f1: float | None = None
    balanced_accuracy: float | None = None
    auc: float | None = None
    rmse: float | None = None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "specificity": self.specificity,
            "f1": self.f1,
            "balanced_accuracy": self.balanced_accuracy,
            "auc": self.auc,
            "rmse": self.rmse,
        }


def _as_binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=float)
    if y.ndim != 1:
        raise DataError("labels must be one-dimensional")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("labels must contain only 0 and 1")
    return y


def confusion_at(labels, scores, threshold: float = 0.5) -> ConfusionMatrix:
    """Confusion matrix with positives predicted at score >= threshold."""
    y = _as_binary_labels(labels)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise DataError(f"labels ({y.shape[0]}) and scores ({s.shape[0]}) differ in length")
    if not np.isfinite(s).all():
        raise DataError("scores must be finite")
    pred = s >= threshold
    pos = y == 1.0
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def classification_metrics(cm: ConfusionMatrix) -> MetricBlock:
    """Threshold metrics from a confusion matrix; AUC is computed elsewhere.

    accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
    specificity = tn/(tn+fp), f1 = 2pr/(p+r), balanced = (recall+specificity)/2.
    """
    accuracy = _ratio(cm.tp + cm.tn, cm.total)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    specificity = _ratio(cm.tn, cm.tn + cm.fp)
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    balanced = None
    if recall is not None and specificity is not None:
        balanced = (recall + specificity) / 2
    return MetricBlock(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        balanced_accuracy=balanced,
    )


def _cumulative_roc(labels, scores):
    """Cumulative (tp, fp) counts at each distinct score, descending."""
    y = _as_binary_labels(labels)
    s = np.asarray(scores, dtype=float)
    if s.shape != y.shape:
        raise DataError(f"labels ({y.shape[0]}) and scores ({s.shape[0]}) differ in length")
    n_pos = int(np.sum(y == 1.0))
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: both classes must be present")

    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    # positions where a run of equal scores ends
    last_of_run = np.append(s_sorted[1:] != s_sorted[:-1], True)
    cum_tp = np.cumsum(y_sorted)[last_of_run].astype(np.int64)
    cum_fp = (np.arange(1, y.shape[0] + 1) - np.cumsum(y_sorted))[last_of_run].astype(np.int64)
    return cum_tp, cum_fp, n_pos, n_neg


def auc(labels, scores) -> float:
    """Area under the ROC curve by trapezoidal integration.

    Tied scores are collapsed into single ROC points, which makes the
    trapezoidal area identical to the pairwise concordance statistic
    (concordant + half of tied pairs) / (positives * negatives). The
    accumulation is kept in integers and divided once, so the equality
    with a pairwise oracle is exact, not approximate.
    """
    cum_tp, cum_fp, n_pos, n_neg = _cumulative_roc(labels, scores)
    tp_prev = np.concatenate(([0], cum_tp[:-1]))
    fp_prev = np.concatenate(([0], cum_fp[:-1]))
    # twice the area in (tp, fp) units
    units = int(np.sum((cum_fp - fp_prev) * (cum_tp + tp_prev)))
    return units / (2 * n_pos * n_neg)


def roc_points(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    """ROC coordinates (fpr, tpr) with the (0, 0) origin prepended, one
    point per distinct score, threshold descending. Plot-ready: the
    trapezoidal area under the polyline equals auc()."""
    cum_tp, cum_fp, n_pos, n_neg = _cumulative_roc(labels, scores)
    fpr = np.concatenate(([0.0], cum_fp / n_neg))
    tpr = np.concatenate(([0.0], cum_tp / n_pos))
    return fpr, tpr


def rmse(y, yhat) -> float:
    """Root mean squared error."""
    a = np.asarray(y, dtype=float)
    b = np.asarray(yhat, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"y ({a.shape[0]}) and yhat ({b.shape[0]}) differ in length")
    if a.size == 0:
        raise DataError("RMSE undefined on empty input")
    return float(np.sqrt(np.mean((a - b) ** 2)))
