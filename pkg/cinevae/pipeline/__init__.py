"""Training: data batching, the three stages, the schedule, beta sweep and gradient check."""

from .data import SubjectArrays, holdout_split, iterate_batches, to_arrays, validation_split
from .gradcheck import GradCheckResult, gradient_check
from .inference import Predictions, predict
from .schedule import ScheduleData, fit_schedule, run_schedule, training_subjects
from .stages import StagePhase, stage_weights, train_baseline, train_stage
from .sweep import SweepReport, SweepRow, beta_sweep, format_sweep

__all__ = [
    "SubjectArrays",
    "holdout_split",
    "iterate_batches",
    "to_arrays",
    "validation_split",
    "GradCheckResult",
    "gradient_check",
    "Predictions",
    "predict",
    "ScheduleData",
    "fit_schedule",
    "run_schedule",
    "training_subjects",
    "StagePhase",
    "stage_weights",
    "train_baseline",
    "train_stage",
    "SweepReport",
    "SweepRow",
    "beta_sweep",
    "format_sweep",
]
