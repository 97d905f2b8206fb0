"""Paired significance test between two classifiers."""

from collections.abc import Iterable

import numpy as np
from statsmodels.stats.contingency_tables import mcnemar as mcnemar_table

from ..errors import RejectedInputError

EXACT_BELOW = 25


def discordant_counts(
    preds_a: Iterable[int], preds_b: Iterable[int], labels: Iterable[int]
) -> tuple[int, int, int, int]:
    """(both correct, A only, B only, both wrong)."""
    a = np.asarray(list(preds_a))
    b = np.asarray(list(preds_b))
    y = np.asarray(list(labels))
    if not (a.shape == b.shape == y.shape):
        raise RejectedInputError("predictions and labels differ in length")
    a_ok = a == y
    b_ok = b == y
    return (
        int(np.sum(a_ok & b_ok)),
        int(np.sum(a_ok & ~b_ok)),
        int(np.sum(~a_ok & b_ok)),
        int(np.sum(~a_ok & ~b_ok)),
    )


def mcnemar(preds_a: Iterable[int], preds_b: Iterable[int], labels: Iterable[int]) -> float:
    """
    McNemar p-value over the discordant pairs.

    Exact two-sided binomial test when fewer than 25 pairs are discordant,
    otherwise chi-squared with continuity correction. No discordant pair
    gives p = 1.
    """
    both, only_a, only_b, neither = discordant_counts(preds_a, preds_b, labels)
    if only_a + only_b == 0:
        return 1.0
    exact = only_a + only_b < EXACT_BELOW
    result = mcnemar_table([[both, only_a], [only_b, neither]], exact=exact, correction=True)
    return float(min(1.0, result.pvalue))
