"""Stratified partitions of a labeled cohort."""

from collections.abc import Sequence

import numpy as np
from sklearn.model_selection import train_test_split

from ..errors import ConfigError, RejectedInputError
from ..models.metrics import FoldAssignment
from ..utils.logging import get_logger

logger = get_logger("cinevae.evaluation")


def stratified_kfold(labels: Sequence[int], k: int, seed: int) -> FoldAssignment:
    """
    Shuffle each class with the seed, then deal its members round-robin.

    Dealing continues where the previous class stopped, so fold sizes as
    well as per-fold class counts differ by at most one.

    Raises:
        ConfigError: some class has fewer than k members
    """
    y = np.asarray(labels)
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}", "evaluation.folds")
    rng = np.random.default_rng(seed)
    fold_of = np.full(len(y), -1, dtype=np.int64)
    position = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise ConfigError(
                f"class {cls} has {len(members)} members, fewer than k={k}", "evaluation.folds"
            )
        for index in rng.permutation(members):
            fold_of[index] = position % k
            position += 1
    return FoldAssignment(fold_of=fold_of, k=k)


def stratified_split(
    strata: Sequence[object], fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """
    Split indices into (keep, held_out) with held_out ~ fraction of the subjects.

    Stratifies on the given keys when every stratum allows it; otherwise
    falls back to a plain shuffled split.
    """
    n = len(strata)
    if not 0.0 < fraction < 1.0:
        raise RejectedInputError(f"split fraction must lie in (0, 1), got {fraction}")
    indices = np.arange(n)
    keys = np.asarray([str(s) for s in strata])
    random_state = int(seed) % (2**32)
    try:
        keep, held = train_test_split(
            indices, test_size=fraction, stratify=keys, random_state=random_state
        )
    except ValueError:
        logger.debug("Stratified split impossible for these strata; using a plain split")
        keep, held = train_test_split(indices, test_size=fraction, random_state=random_state)
    return np.sort(keep), np.sort(held)
