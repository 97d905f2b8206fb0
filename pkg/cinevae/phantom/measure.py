"""Septal boundary extraction from label maps.

The septal boundary of a slice is the leftmost LV column (myocardium or
blood pool) on the rows around the LV centre. Early-systolic displacement is
that column averaged over the frames with phase < 0.2 (frame 0 included),
minus its value at frame 0; positive values point towards the LV centre.
"""

import numpy as np

from ..errors import DegenerateInputError
from ..models.phantom import LV_BLOOD, LV_MYO, SegSequence

EARLY_SYSTOLE_END = 0.2
DEFAULT_HALF_BAND = 3


def lv_mask(slice_map: np.ndarray) -> np.ndarray:
    return (slice_map == LV_BLOOD) | (slice_map == LV_MYO)


def lv_center_row(slice_map: np.ndarray) -> int:
    rows, _ = np.nonzero(lv_mask(slice_map))
    if rows.size == 0:
        raise DegenerateInputError("slice has no LV pixels")
    return int(round(float(rows.mean())))


def septal_boundary_column(
    slice_map: np.ndarray, center_row: int, half_band: int = DEFAULT_HALF_BAND
) -> float:
    """Leftmost LV column averaged over rows center_row +/- half_band (NaN when no row has LV)."""
    mask = lv_mask(slice_map)
    columns = []
    for row in range(center_row - half_band, center_row + half_band + 1):
        if 0 <= row < mask.shape[0] and mask[row].any():
            columns.append(int(np.argmax(mask[row])))
    return float(np.mean(columns)) if columns else float("nan")


def septal_displacement(
    seq: SegSequence, slice_index: int = 0, half_band: int = DEFAULT_HALF_BAND
) -> float:
    """Mean early-systolic septal boundary shift relative to frame 0, in pixels."""
    labels = seq.labels[:, slice_index]
    center_row = lv_center_row(labels[0])
    reference = septal_boundary_column(labels[0], center_row, half_band)
    early = [t for t, phase in enumerate(seq.frame_phase) if phase < EARLY_SYSTOLE_END]
    if not early or np.isnan(reference):
        raise DegenerateInputError("no early-systolic frames or no septal boundary at frame 0")
    shifts = [septal_boundary_column(labels[t], center_row, half_band) - reference for t in early]
    return float(np.nanmean(shifts))
