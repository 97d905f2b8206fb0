"""Data models for phantoms, metrics, histories and experiments."""

from .experiment import ArtifactKind, ArtifactRecord, ExperimentManifest, Phase, PhaseRecord
from .history import EpochRecord, TrainHistory
from .metrics import (
    ConfusionCounts,
    FoldAssignment,
    MethodMetrics,
    MetricsReport,
    OperatingPoint,
    RateTriple,
    RocCurve,
)
from .phantom import (
    BACKGROUND,
    LABEL_VALUES,
    LV_BLOOD,
    LV_MYO,
    RV_BLOOD,
    GenerativeFactors,
    LabeledSubject,
    SegFrame,
    SegSequence,
    check_frame,
    uniform_phases,
)

__all__ = [
    "BACKGROUND",
    "LV_BLOOD",
    "LV_MYO",
    "RV_BLOOD",
    "LABEL_VALUES",
    "SegFrame",
    "SegSequence",
    "GenerativeFactors",
    "LabeledSubject",
    "check_frame",
    "uniform_phases",
    "ConfusionCounts",
    "RocCurve",
    "OperatingPoint",
    "FoldAssignment",
    "RateTriple",
    "MethodMetrics",
    "MetricsReport",
    "EpochRecord",
    "TrainHistory",
    "Phase",
    "ArtifactKind",
    "ArtifactRecord",
    "PhaseRecord",
    "ExperimentManifest",
]
