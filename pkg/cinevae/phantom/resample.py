"""Temporal and spatial normalisation of label-map cines.

Labels are categorical, so both operations only ever copy existing pixels or
frames (nearest neighbour); nothing is interpolated.
"""

from collections.abc import Sequence
from typing import Optional

import numpy as np

from ..errors import RejectedInputError
from ..models.phantom import BACKGROUND, SegFrame, SegSequence, check_frame, uniform_phases


def _check_anchors(name: str, anchors: Sequence[float]) -> np.ndarray:
    values = np.asarray(anchors, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2:
        raise RejectedInputError(f"{name} needs at least two phases")
    if np.any(values < 0.0) or np.any(values >= 1.0):
        raise RejectedInputError(f"{name} must lie in [0, 1)")
    if np.any(np.diff(values) <= 0):
        raise RejectedInputError(f"{name} must be strictly increasing")
    return values


def warp_phases(
    phases_out: np.ndarray, anchors_in: Sequence[float], anchors_out: Sequence[float]
) -> np.ndarray:
    """Map output phases to input phases through the periodic piecewise-linear warp."""
    a_in = _check_anchors("anchors_in", anchors_in)
    a_out = _check_anchors("anchors_out", anchors_out)
    if len(a_in) != len(a_out):
        raise RejectedInputError("anchor lists differ in length")
    # Wrap one anchor on each side so the warp is defined on the whole cycle.
    xp = np.concatenate([[a_out[-1] - 1.0], a_out, [a_out[0] + 1.0]])
    fp = np.concatenate([[a_in[-1] - 1.0], a_in, [a_in[0] + 1.0]])
    return np.mod(np.interp(phases_out, xp, fp), 1.0)


def nearest_frame(source_phases: np.ndarray, phase: float) -> int:
    """Index of the frame closest to phase on the unit circle; ties go to the earlier frame."""
    diff = np.abs(source_phases - phase)
    distance = np.minimum(diff, 1.0 - diff)
    return int(np.argmin(distance))


def temporal_resample(
    seq: SegSequence,
    anchors_in: Sequence[float],
    anchors_out: Sequence[float],
    T_out: int,
) -> SegSequence:
    """
    Resample a cine to T_out uniformly spaced phases.

    Args:
        seq: Input sequence
        anchors_in: Anchor phases in the input timing (e.g. ED, ES)
        anchors_out: Where those anchors land in the output timing
        T_out: Number of output frames

    Returns:
        Sequence whose frame t copies the input frame nearest to the warped phase t / T_out

    Raises:
        RejectedInputError: anchors not strictly increasing, unequal lengths, or T_out < 1
    """
    if T_out < 1:
        raise RejectedInputError(f"T_out must be >= 1, got {T_out}")
    phases_out = uniform_phases(T_out)
    source = warp_phases(phases_out, anchors_in, anchors_out)
    indices = [nearest_frame(seq.frame_phase, float(p)) for p in source]
    return SegSequence(seq.labels[indices].copy(), phases_out)


def _nearest_axis(n_in: int, spacing_in: float, spacing_out: float) -> np.ndarray:
    n_mid = max(1, int(round(n_in * spacing_in / spacing_out)))
    source = np.floor((np.arange(n_mid) + 0.5) * spacing_out / spacing_in).astype(np.int64)
    return np.clip(source, 0, n_in - 1)


def _crop_or_pad(plane: np.ndarray, axis: int, size: int) -> np.ndarray:
    current = plane.shape[axis]
    if current >= size:
        start = (current - size) // 2
        return np.take(plane, np.arange(start, start + size), axis=axis)
    before = (size - current) // 2
    pad = [(0, 0)] * plane.ndim
    pad[axis] = (before, size - current - before)
    return np.pad(plane, pad, mode="constant", constant_values=BACKGROUND)


def spatial_resample(
    frame: SegFrame,
    spacing_in: float,
    spacing_out: float,
    out_shape: Optional[tuple[int, int]] = None,
) -> SegFrame:
    """
    Nearest-neighbour resample an (S, H, W) label map to a new pixel spacing.

    The resampled grid is centre-cropped or background-padded to out_shape
    (default: the input's H, W), so the result size never depends on the
    spacing ratio.
    """
    if spacing_in <= 0 or spacing_out <= 0:
        raise RejectedInputError("pixel spacings must be positive")
    frame = check_frame(np.asarray(frame))
    _, height, width = frame.shape
    out_h, out_w = out_shape if out_shape is not None else (height, width)
    rows = _nearest_axis(height, spacing_in, spacing_out)
    cols = _nearest_axis(width, spacing_in, spacing_out)
    resampled = frame[:, rows][:, :, cols]
    resampled = _crop_or_pad(resampled, 1, out_h)
    return _crop_or_pad(resampled, 2, out_w)
