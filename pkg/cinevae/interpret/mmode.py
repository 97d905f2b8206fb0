"""M-mode images: one fixed line sampled in every frame."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DegenerateInputError, RejectedInputError
from ..models.phantom import LV_BLOOD, LV_MYO, RV_BLOOD, SegSequence

Point = tuple[int, int]  # (x column, y row)

LINE_MARGIN = 2


@dataclass
class MModeImage:
    image: np.ndarray   # (L, T) class ids; column t comes from frame t
    p0: Point
    p1: Point
    slice_index: int

    @property
    def length(self) -> int:
        return int(self.image.shape[0])


def line_pixels(p0: Point, p1: Point) -> tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of the nearest pixels along p0 -> p1, one per unit step of the longer axis."""
    (x0, y0), (x1, y1) = p0, p1
    count = max(abs(x1 - x0), abs(y1 - y0)) + 1
    t = np.linspace(0.0, 1.0, count)
    cols = np.rint(x0 + t * (x1 - x0)).astype(np.int64)
    rows = np.rint(y0 + t * (y1 - y0)).astype(np.int64)
    return rows, cols


def _check_point(point: Point, height: int, width: int) -> None:
    x, y = point
    if not (0 <= x < width and 0 <= y < height):
        raise RejectedInputError(f"line endpoint {point} outside the {width}x{height} grid")


def mmode(seq: SegSequence, slice_index: int, p0: Point, p1: Point) -> MModeImage:
    """
    Sample the segment p0 -> p1 of one slice in every frame.

    Raises:
        RejectedInputError: endpoint outside the grid or slice index out of range
    """
    t, s, h, w = seq.shape
    if not 0 <= slice_index < s:
        raise RejectedInputError(f"slice {slice_index} out of range (S={s})")
    _check_point(p0, h, w)
    _check_point(p1, h, w)
    rows, cols = line_pixels(p0, p1)
    image = seq.labels[:, slice_index][:, rows, cols].T.copy()
    return MModeImage(image=image, p0=tuple(p0), p1=tuple(p1), slice_index=slice_index)


def default_line(seq: SegSequence, slice_index: Optional[int] = None) -> tuple[int, Point, Point]:
    """
    Horizontal line through the LV and RV at end-diastole.

    The row is the LV centroid row of the middle slice (or slice_index) at
    frame 0; the segment runs from just left of the RV to just right of the LV.

    Returns:
        (slice_index, p0, p1)
    """
    _, s, h, w = seq.shape
    slice_index = s // 2 if slice_index is None else slice_index
    ed = seq.labels[0, slice_index]
    lv_rows, lv_cols = np.nonzero((ed == LV_BLOOD) | (ed == LV_MYO))
    if lv_rows.size == 0:
        raise DegenerateInputError("no LV pixels at end-diastole to place the M-mode line")
    row = int(round(float(lv_rows.mean())))
    _, rv_cols = np.nonzero(ed == RV_BLOOD)
    left = int(rv_cols.min()) if rv_cols.size else int(lv_cols.min())
    x0 = max(0, left - LINE_MARGIN)
    x1 = min(w - 1, int(lv_cols.max()) + LINE_MARGIN)
    return slice_index, (x0, row), (x1, row)
