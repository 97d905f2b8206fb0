"""Data models for segmentation cines and phantom subjects."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt

from ..errors import RejectedInputError

BACKGROUND = 0
LV_BLOOD = 1
LV_MYO = 2
RV_BLOOD = 3
LABEL_VALUES = (BACKGROUND, LV_BLOOD, LV_MYO, RV_BLOOD)

# One frame is an (S, H, W) uint8 label map, one slice per channel.
SegFrame = npt.NDArray[np.uint8]


def check_frame(frame: np.ndarray, shape: Optional[tuple[int, int, int]] = None) -> SegFrame:
    """Validate an (S, H, W) label map and return it as uint8."""
    if frame.ndim != 3:
        raise RejectedInputError(f"frame must be (S, H, W), got shape {frame.shape}")
    if shape is not None and tuple(frame.shape) != tuple(shape):
        raise RejectedInputError(f"frame shape {frame.shape} does not match {shape}")
    if frame.size and (frame.min() < 0 or frame.max() > RV_BLOOD):
        raise RejectedInputError("frame holds class ids outside {0, 1, 2, 3}")
    return frame.astype(np.uint8, copy=False)


def uniform_phases(frames: int) -> np.ndarray:
    """Phases t / T for t = 0..T-1."""
    return np.arange(frames, dtype=np.float64) / frames


@dataclass
class SegSequence:
    """A T-frame, S-slice label-map cine stored as a (T, S, H, W) uint8 array."""

    labels: np.ndarray
    frame_phase: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.labels.ndim != 4:
            raise RejectedInputError(f"sequence must be (T, S, H, W), got {self.labels.shape}")
        self.labels = self.labels.astype(np.uint8, copy=False)
        if self.frame_phase is None:
            self.frame_phase = uniform_phases(self.labels.shape[0])
        self.frame_phase = np.asarray(self.frame_phase, dtype=np.float64)
        if len(self.frame_phase) != self.labels.shape[0]:
            raise RejectedInputError("frame_phase length differs from frame count")
        if self.frame_phase[0] != 0.0 or np.any(np.diff(self.frame_phase) <= 0):
            raise RejectedInputError("frame_phase must start at 0 and be strictly increasing")
        if self.frame_phase[-1] >= 1.0:
            raise RejectedInputError("frame_phase must lie in [0, 1)")

    @property
    def frames(self) -> list[SegFrame]:
        return list(self.labels)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        t, s, h, w = self.labels.shape
        return t, s, h, w

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SegSequence):
            return NotImplemented
        return (
            self.labels.shape == other.labels.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.frame_phase, other.frame_phase)
        )


@dataclass(frozen=True)
class GenerativeFactors:
    """Planted factors of one phantom subject.

    Per-slice radii and centres are derived from base_radius and the centre;
    these six floats are the whole persisted factor block.
    """
    contraction_amplitude: float   # ejection-fraction analog in [0, 1]
    sf_amplitude: float            # peak early-systolic septal displacement, px
    hidden_factor: float           # lateral-wall delay driver in [0, 1]
    base_radius: float             # ED endocardial radius of slice 0, px
    center_x: float                # LV centre column, px
    center_y: float                # LV centre row, px

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (
            self.contraction_amplitude,
            self.sf_amplitude,
            self.hidden_factor,
            self.base_radius,
            self.center_x,
            self.center_y,
        )


@dataclass
class LabeledSubject:
    """One subject: cine, primary label y, concept labels y_k, factors and seed.

    y is None for unlabeled pretraining-pool subjects.
    """
    sequence: SegSequence
    y: Optional[int]
    y_k: list[int]
    factors: GenerativeFactors
    seed: int

    @property
    def is_labeled(self) -> bool:
        return self.y is not None

    @property
    def y_sf(self) -> int:
        return self.y_k[0] if self.y_k else 0
