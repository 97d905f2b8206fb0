"""Overlap and classification metrics."""

from collections.abc import Iterable

import numpy as np
from sklearn.metrics import roc_curve

from ..errors import DegenerateInputError, RejectedInputError
from ..models.metrics import ConfusionCounts, OperatingPoint, RocCurve

FOREGROUND = (1, 2, 3)


def dice(a: np.ndarray, b: np.ndarray, classes: Iterable[int] = FOREGROUND) -> float:
    """
    Mean Dice over the requested classes.

    A class absent from both maps scores 1.0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise RejectedInputError(f"dice of differently shaped maps: {a.shape} vs {b.shape}")
    scores = []
    for c in classes:
        in_a = a == c
        in_b = b == c
        size = int(in_a.sum()) + int(in_b.sum())
        if size == 0:
            scores.append(1.0)
        else:
            scores.append(2.0 * int(np.logical_and(in_a, in_b).sum()) / size)
    if not scores:
        raise RejectedInputError("dice needs at least one class")
    return float(np.mean(scores))


def _binary(values: Iterable[int], name: str) -> np.ndarray:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values).astype(np.int64)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise RejectedInputError(f"{name} must be binary")
    return arr


def confusion(labels: Iterable[int], preds: Iterable[int]) -> ConfusionCounts:
    y = _binary(labels, "labels")
    p = _binary(preds, "predictions")
    if y.shape != p.shape:
        raise RejectedInputError("labels and predictions differ in length")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def apply_threshold(scores: Iterable[float], threshold: float) -> np.ndarray:
    """Positive where score >= threshold."""
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


def roc(labels: Iterable[int], scores: Iterable[float]) -> RocCurve:
    """
    ROC over every distinct score, plus sentinels at -inf and +inf.

    Raises:
        DegenerateInputError: labels hold a single class
        RejectedInputError: lengths differ
    """
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise RejectedInputError("labels and scores differ in length")
    positives = int(y.sum())
    negatives = int(len(y) - positives)
    if positives == 0 or negatives == 0:
        raise DegenerateInputError("ROC needs both classes in the labels")

    fpr, tpr, thresholds = roc_curve(y, s, drop_intermediate=False)
    # sklearn orders thresholds descending and prepends an "all negative" point.
    tp = np.rint(tpr[1:] * positives)[::-1]
    fp = np.rint(fpr[1:] * negatives)[::-1]
    return RocCurve(
        thresholds=np.concatenate([[-np.inf], thresholds[1:][::-1], [np.inf]]),
        sensitivity=np.concatenate([[1.0], tp / positives, [0.0]]),
        specificity=np.concatenate([[0.0], (negatives - fp) / negatives, [1.0]]),
        positives=positives,
        negatives=negatives,
    )


def youden(curve: RocCurve) -> OperatingPoint:
    """
    Point maximising SEN + SPE - 1; ties go to the lowest threshold.

    A -inf optimum is reported as the lowest score, which classifies every
    subject on the curve the same way and stays finite in JSON reports.
    """
    if len(curve) == 0:
        raise DegenerateInputError("empty ROC curve")
    if curve.positives and curve.negatives:
        # Exact integer comparison: J * P * N = TP * N + TN * P - P * N
        tp = np.rint(curve.sensitivity * curve.positives).astype(np.int64)
        tn = np.rint(curve.specificity * curve.negatives).astype(np.int64)
        objective = tp * curve.negatives + tn * curve.positives
    else:
        objective = curve.sensitivity + curve.specificity
    best = int(np.argmax(objective))
    threshold = float(curve.thresholds[best])
    if threshold == -np.inf and len(curve) > 2:
        threshold = float(curve.thresholds[1])
    return OperatingPoint(
        threshold=threshold,
        sensitivity=float(curve.sensitivity[best]),
        specificity=float(curve.specificity[best]),
    )
