"""Confusion-matrix metrics and the strict pairwise AUC (positive class = 1)."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import TremorBenchError


class MetricError(TremorBenchError, ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    TP: int
    FP: int
    TN: int
    FN: int

    def __post_init__(self):
        if min(self.TP, self.FP, self.TN, self.FN) < 0:
            raise MetricError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.TN + self.FN


def _binary(name: str, v) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim != 1:
        raise MetricError(f"{name} must be 1-D")
    if not np.all((arr == 0) | (arr == 1)):
        raise MetricError(f"{name} contains non-binary entries")
    return arr.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = _binary("y_true", y_true)
    p = _binary("y_pred", y_pred)
    if len(t) != len(p):
        raise MetricError(f"length mismatch: {len(t)} labels vs {len(p)} predictions")
    if len(t) == 0:
        raise MetricError("cannot score an empty prediction set")
    return ConfusionMatrix(
        TP=int(np.sum((t == 1) & (p == 1))),
        FP=int(np.sum((t == 0) & (p == 1))),
        TN=int(np.sum((t == 0) & (p == 0))),
        FN=int(np.sum((t == 1) & (p == 0))),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def basic_metrics(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """Accuracy, TPR, PPV and F1; empty denominators give 0."""
    if cm.total == 0:
        raise MetricError("confusion matrix is empty")
    accuracy = (cm.TP + cm.TN) / cm.total
    tpr = _ratio(cm.TP, cm.TP + cm.FN)
    ppv = _ratio(cm.TP, cm.TP + cm.FP)
    # equals 2 PPV TPR / (PPV + TPR) but rounds once, so it is exact to the last bit
    f1 = _ratio(2 * cm.TP, 2 * cm.TP + cm.FP + cm.FN)
    return accuracy, tpr, ppv, f1


def weighted_metrics(y_true, y_pred) -> tuple[float, float, float]:
    """Support-weighted averages over both classes of precision, recall and F1."""
    cm = confusion(y_true, y_pred)
    n = cm.total
    # class 0 viewed as positive swaps the roles of the counts
    flipped = ConfusionMatrix(TP=cm.TN, FP=cm.FN, TN=cm.TP, FN=cm.FP)
    w_ppv = w_f1 = 0.0
    for m in (cm, flipped):
        support = m.TP + m.FN
        _, _, ppv, f1 = basic_metrics(m)
        w_ppv += support * ppv
        w_f1 += support * f1
    # support * recall of a class is its true-positive count, summed exactly
    w_tpr = (cm.TP + cm.TN) / n
    return w_ppv / n, w_tpr, w_f1 / n


def auc(y_true, scores, ties: str = "strict") -> float:
    """Fraction of (negative, positive) pairs ranked correctly.

    ``ties="strict"`` counts only ``score(neg) < score(pos)``; ``"half"``
    counts tied pairs as one half. Runs in O(n log n).
    """
    t = _binary("y_true", y_true)
    s = np.asarray(scores, dtype=float)
    if s.shape != t.shape:
        raise MetricError("scores and labels differ in length")
    if not np.all(np.isfinite(s)):
        raise MetricError("scores must be finite")
    neg = np.sort(s[t == 0])
    pos = s[t == 1]
    if len(neg) == 0 or len(pos) == 0:
        raise MetricError("AUC needs both classes present")
    below = np.searchsorted(neg, pos, side="left")
    wins = int(below.sum())
    if ties == "half":
        tied = int((np.searchsorted(neg, pos, side="right") - below).sum())
        return (wins + 0.5 * tied) / (len(neg) * len(pos))
    if ties != "strict":
        raise MetricError(f"unknown tie mode {ties!r}")
    return wins / (len(neg) * len(pos))


def auc_pairwise(y_true, scores) -> float:
    """Literal double sum over negative/positive pairs; quadratic, for checking."""
    t = list(_binary("y_true", y_true))
    s = [float(v) for v in scores]
    d0 = [s[i] for i in range(len(t)) if t[i] == 0]
    d1 = [s[i] for i in range(len(t)) if t[i] == 1]
    if not d0 or not d1:
        raise MetricError("AUC needs both classes present")
    hits = sum(1 for f0 in d0 for f1 in d1 if f0 < f1)
    return hits / (len(d0) * len(d1))


@dataclass(frozen=True)
class EvalReport:
    model: str
    subset: str
    confusion: ConfusionMatrix
    accuracy: float
    ppv: float
    tpr: float
    f1: float
    auc: Optional[float]
    weighted_ppv: float
    weighted_tpr: float
    weighted_f1: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["confusion"] = ConfusionMatrix(**d["confusion"])
        return cls(**d)


def evaluate(y_true, y_pred, scores, model: str = "", subset: str = "") -> EvalReport:
    cm = confusion(y_true, y_pred)
    accuracy, tpr, ppv, f1 = basic_metrics(cm)
    w_ppv, w_tpr, w_f1 = weighted_metrics(y_true, y_pred)
    t = np.asarray(y_true)
    auc_value = auc(y_true, scores) if 0 < t.sum() < len(t) else None
    return EvalReport(model, subset, cm, accuracy, ppv, tpr, f1, auc_value, w_ppv, w_tpr, w_f1)


def log_loss(y_true, proba, eps: float = 1e-15) -> float:
    """Mean binary cross-entropy with probabilities clipped to [eps, 1 - eps]."""
    t = np.asarray(y_true, dtype=float)
    p = np.clip(np.asarray(proba, dtype=float), eps, 1.0 - eps)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))
