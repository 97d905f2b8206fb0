"""Metrics, paired tests and fold assignment.

Method comparison lives in ``cinevae.evaluation.crossval`` (it trains models,
so it is not imported here).
"""

from .folds import stratified_kfold, stratified_split
from .metrics import FOREGROUND, apply_threshold, confusion, dice, roc, youden
from .stats import discordant_counts, mcnemar

__all__ = [
    "stratified_kfold",
    "stratified_split",
    "FOREGROUND",
    "apply_threshold",
    "confusion",
    "dice",
    "roc",
    "youden",
    "discordant_counts",
    "mcnemar",
]
