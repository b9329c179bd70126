"""Confusion-matrix rates, regression R and the evaluation report."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UndefinedCorrelationError, UndefinedRateError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other):
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion_matrix(predictions, labels) -> ConfusionMatrix:
    p = np.asarray(predictions).astype(int)
    y = np.asarray(labels).astype(int)
    if p.shape != y.shape or p.ndim != 1:
        raise DimensionError(f"predictions {p.shape} and labels {y.shape} differ")
    if p.size == 0:
        raise DimensionError("empty predictions")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (y == 1))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fp=int(np.sum((p == 1) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def _ratio(num, den, what):
    if den == 0:
        raise UndefinedRateError(f"{what} undefined: zero denominator")
    return num / den


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.total, "accuracy")


def tpr(cm: ConfusionMatrix) -> float:
    """Sensitivity, TP / (TP + FN)."""
    return _ratio(cm.tp, cm.tp + cm.fn, "TPR")


def specificity(cm: ConfusionMatrix) -> float:
    """TN / (TN + FP); see :func:`fpr` for the complementary rate."""
    return _ratio(cm.tn, cm.tn + cm.fp, "specificity")


def fpr(cm: ConfusionMatrix) -> float:
    """FP / (FP + TN), i.e. ``1 - specificity``."""
    return _ratio(cm.fp, cm.fp + cm.tn, "FPR")


def regression_r(outputs, targets) -> float:
    """Pearson correlation between network outputs and targets."""
    o = np.asarray(outputs, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if o.shape != t.shape:
        raise DimensionError(f"length mismatch {o.size} vs {t.size}")
    if o.size < 2:
        raise UndefinedCorrelationError("need at least two points")
    do, dt = o - o.mean(), t - t.mean()
    so, st = math.sqrt(np.dot(do, do)), math.sqrt(np.dot(dt, dt))
    if so == 0 or st == 0:
        raise UndefinedCorrelationError("zero variance")
    r = float(np.dot(do, dt) / (so * st))
    return max(-1.0, min(1.0, r))


def _maybe(fn, *args):
    try:
        return fn(*args)
    except (UndefinedRateError, UndefinedCorrelationError):
        return None


# Row order and captions of the ROC rate table.
REPORT_ROWS = (("train", "Training"), ("test", "Testing"), ("val", "Validation"),
               ("overall", "Overall training performance"))


@dataclass
class SplitResult:
    confusion: ConfusionMatrix
    accuracy: float
    tpr: float | None
    fpr: float | None
    specificity: float | None
    regression_r: float | None
    mse: float

    def as_dict(self) -> dict:
        return {"confusion": self.confusion.as_dict(), "accuracy": self.accuracy,
                "tpr": self.tpr, "fpr": self.fpr, "specificity": self.specificity,
                "regression_r": self.regression_r, "mse": self.mse}


def split_result(scores, labels, threshold: float) -> SplitResult:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    cm = confusion_matrix((scores >= threshold).astype(int), labels)
    return SplitResult(
        confusion=cm,
        accuracy=accuracy(cm),
        tpr=_maybe(tpr, cm),
        fpr=_maybe(fpr, cm),
        specificity=_maybe(specificity, cm),
        regression_r=_maybe(regression_r, scores, labels),
        mse=float(np.mean((scores - labels) ** 2)),
    )


@dataclass
class EvalReport:
    """Per-split results plus pooled ("overall") statistics.

    ``roc`` holds ``(threshold, tpr, fpr)`` triples over the pooled scores,
    empty when the pooled labels are single-class (``roc_degenerate`` set).
    """

    splits: dict
    threshold: float
    roc: list
    roc_degenerate: str | None = None

    @property
    def overall(self) -> SplitResult:
        return self.splits["overall"]

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "splits": {k: v.as_dict() for k, v in self.splits.items()},
            "table": [{"multiset": caption,
                       "false_positive_rate": self.splits[k].fpr,
                       "true_positive_rate": self.splits[k].tpr,
                       "specificity": self.splits[k].specificity}
                      for k, caption in REPORT_ROWS if k in self.splits],
            "notes": ["specificity is TN/(TN+FP); false_positive_rate is FP/(FP+TN)"],
            "roc": [{"threshold": t, "tpr": a, "fpr": b} for t, a, b in self.roc],
            "roc_degenerate": self.roc_degenerate,
        }
