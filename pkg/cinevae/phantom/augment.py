"""Rigid in-plane augmentation of label-map cines."""

from dataclasses import replace

import numpy as np
from scipy import ndimage

from ..errors import RejectedInputError
from ..models.phantom import BACKGROUND, LabeledSubject, SegFrame, SegSequence


def transform_frame(
    frame: SegFrame, angle_deg: float, shift: tuple[float, float] = (0.0, 0.0)
) -> SegFrame:
    """
    Rotate every slice about the grid centre, then translate.

    Args:
        frame: (S, H, W) label map
        angle_deg: Rotation angle in degrees
        shift: Translation (columns, rows) in pixels

    Returns:
        Transformed label map, nearest neighbour, background outside the source
    """
    if angle_deg == 0 and shift[0] == 0 and shift[1] == 0:
        return frame.copy()
    _, height, width = frame.shape
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    # Output (row, col) -> input (row, col): inverse rotation about the centre.
    inverse = np.array([[cos, sin], [-sin, cos]])
    center = np.array([(height - 1) / 2.0, (width - 1) / 2.0])
    translation = np.array([shift[1], shift[0]], dtype=np.float64)
    offset = center - inverse @ (center + translation)
    out = np.empty_like(frame)
    for s in range(frame.shape[0]):
        out[s] = ndimage.affine_transform(
            frame[s], inverse, offset=offset, order=0, mode="constant", cval=BACKGROUND
        )
    return out


def sample_transform(
    max_rotation: float, max_translation: float, seed: int
) -> tuple[float, tuple[float, float]]:
    """One (angle, (dx, dy)) draw from the seed."""
    if max_rotation < 0 or max_translation < 0:
        raise RejectedInputError("augmentation bounds must be >= 0")
    rng = np.random.default_rng(seed)
    angle = float(rng.uniform(-max_rotation, max_rotation))
    dx, dy = rng.uniform(-max_translation, max_translation, size=2)
    return angle, (float(dx), float(dy))


def augment_labels(
    labels: np.ndarray, max_rotation: float, max_translation: float, seed: int
) -> np.ndarray:
    """Apply one sampled transform to every frame of a (T, S, H, W) label array."""
    angle, shift = sample_transform(max_rotation, max_translation, seed)
    return np.stack([transform_frame(frame, angle, shift) for frame in labels])


def augment(
    subject: LabeledSubject, max_rotation: float, max_translation: float, seed: int
) -> LabeledSubject:
    """Same rotation and translation for all frames and slices; labels untouched."""
    labels = augment_labels(subject.sequence.labels, max_rotation, max_translation, seed)
    sequence = SegSequence(labels, subject.sequence.frame_phase.copy())
    return replace(subject, sequence=sequence, y_k=list(subject.y_k))
