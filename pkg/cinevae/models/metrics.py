"""Data models for evaluation results."""

from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float:
        positives = self.tp + self.fn
        return self.tp / positives if positives else 0.0

    @property
    def specificity(self) -> float:
        negatives = self.tn + self.fp
        return self.tn / negatives if negatives else 0.0

    @property
    def balanced_accuracy(self) -> float:
        return (self.sensitivity + self.specificity) / 2


@dataclass(frozen=True)
class RocCurve:
    """(threshold, SEN, SPE) triples in ascending threshold order.

    The first threshold is -inf (everything positive), the last +inf
    (everything negative). A subject is predicted positive when score >= threshold.
    """
    thresholds: np.ndarray
    sensitivity: np.ndarray
    specificity: np.ndarray
    positives: int = 0
    negatives: int = 0

    def __len__(self) -> int:
        return len(self.thresholds)

    def points(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(se), float(sp))
            for t, se, sp in zip(self.thresholds, self.sensitivity, self.specificity, strict=True)
        ]


@dataclass(frozen=True)
class OperatingPoint:
    """Youden-optimal point of a ROC curve."""
    threshold: float
    sensitivity: float
    specificity: float

    @property
    def youden_j(self) -> float:
        return self.sensitivity + self.specificity - 1

    @property
    def balanced_accuracy(self) -> float:
        return (self.sensitivity + self.specificity) / 2


@dataclass(frozen=True)
class FoldAssignment:
    """fold_of[i] is the fold id of subject i."""
    fold_of: np.ndarray
    k: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.fold_of == f)) for f in range(self.k)]


@dataclass
class RateTriple:
    """BACC / SEN / SPE as percentages."""
    bacc: float
    sen: float
    spe: float

    @classmethod
    def from_rates(cls, sensitivity: float, specificity: float) -> "RateTriple":
        return cls(
            bacc=round(100 * (sensitivity + specificity) / 2, 2),
            sen=round(100 * sensitivity, 2),
            spe=round(100 * specificity, 2),
        )


@dataclass
class MethodMetrics:
    """One row of the comparison table."""
    method: str
    bacc: float
    sen: float
    spe: float
    dice: Optional[float] = None
    mcnemar_p_vs_baseline: Optional[float] = None
    threshold: Optional[float] = None
    pooled_youden: Optional[RateTriple] = None
    per_fold_mean: Optional[RateTriple] = None
    concept: Optional[dict[str, Any]] = None

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class MetricsReport:
    """Comparison of methods, mirroring baseline / VAE+primary / VAE+primary+concept rows."""
    protocol: str
    folds: int
    seed: int
    n_subjects: int
    methods: list[MethodMetrics] = field(default_factory=list)

    def row(self, method: str) -> MethodMetrics:
        for m in self.methods:
            if m.method == method:
                return m
        raise KeyError(method)

    def to_json(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol,
            "folds": self.folds,
            "seed": self.seed,
            "n_subjects": self.n_subjects,
            "methods": [m.to_json() for m in self.methods],
        }
