"""In-memory training arrays, splits and deterministic batching."""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..config import EvalConfig, ModelConfig, TrainConfig
from ..errors import RejectedInputError
from ..evaluation.folds import stratified_split
from ..models.phantom import LabeledSubject
from ..phantom.augment import augment_labels
from ..phantom.geometry import ES_PHASE
from ..phantom.resample import temporal_resample
from ..utils.seeding import derive_seed

MISSING = -1


@dataclass
class SubjectArrays:
    """Stacked subjects: labels (N, T, S, H, W) uint8, y (N,), y_k (N, K); -1 marks a missing label."""
    labels: np.ndarray
    y: np.ndarray
    y_k: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: Sequence[int] | np.ndarray) -> "SubjectArrays":
        idx = np.asarray(indices, dtype=np.int64)
        return SubjectArrays(self.labels[idx], self.y[idx], self.y_k[idx])

    @property
    def has_primary_labels(self) -> bool:
        return len(self) > 0 and bool(np.all(self.y != MISSING))

    def has_concept_labels(self, k: int) -> bool:
        return len(self) > 0 and self.y_k.shape[1] > k and bool(np.all(self.y_k[:, k] != MISSING))

    def strata(self) -> list[tuple[int, int]]:
        """(y, y_sf) per subject, the key used for stratified splits."""
        sf = self.y_k[:, 0] if self.y_k.shape[1] else np.full(len(self), MISSING)
        return [(int(a), int(b)) for a, b in zip(self.y, sf)]


def to_arrays(subjects: Sequence[LabeledSubject], config: ModelConfig) -> SubjectArrays:
    """
    Stack subjects for a model configuration.

    Sequences with a different frame count are resampled to config.frames
    with ED/ES anchors held fixed.
    """
    if not subjects:
        raise RejectedInputError("no subjects")
    k = len(config.concepts)
    frames, ys, yks = [], [], []
    for subject in subjects:
        seq = subject.sequence
        _, s, h, w = seq.shape
        if (s, h, w) != (config.slices, config.height, config.width):
            raise RejectedInputError(
                f"subject {subject.seed}: frames are {(s, h, w)}, model expects "
                f"{(config.slices, config.height, config.width)}"
            )
        if len(seq) != config.frames:
            seq = temporal_resample(seq, [0.0, ES_PHASE], [0.0, ES_PHASE], config.frames)
        frames.append(seq.labels)
        ys.append(MISSING if subject.y is None else subject.y)
        concept = list(subject.y_k[:k]) + [MISSING] * max(0, k - len(subject.y_k))
        yks.append(concept)
    return SubjectArrays(
        labels=np.stack(frames),
        y=np.asarray(ys, dtype=np.int64),
        y_k=np.asarray(yks, dtype=np.int64).reshape(len(subjects), k),
    )


def validation_split(arrays: SubjectArrays, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """(fit, validation) indices; validation is empty when the fraction is 0 or the set is tiny."""
    n = len(arrays)
    if config.validation_fraction == 0 or n < 4:
        return np.arange(n), np.arange(0)
    return stratified_split(arrays.strata(), config.validation_fraction, config.seed)


def holdout_split(arrays: SubjectArrays, config: EvalConfig) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) indices of the holdout protocol."""
    return stratified_split(arrays.strata(), config.test_fraction, config.seed)


def batch_order(n: int, batch_size: int, seed: int, *coords: int) -> list[np.ndarray]:
    """Seeded permutation of range(n) cut into batches."""
    rng = np.random.default_rng(derive_seed(seed, *coords))
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def iterate_batches(
    arrays: SubjectArrays,
    config: TrainConfig,
    *coords: int,
    augment: bool = True,
) -> Iterator[tuple[int, torch.Tensor, torch.Tensor, torch.Tensor]]:
    """
    Yield (batch index, labels, y, y_k) tensors for one epoch.

    The permutation and every subject's augmentation draw depend only on
    (seed, *coords, batch index, position).
    """
    aug = config.augmentation
    for b, idx in enumerate(batch_order(len(arrays), config.batch_size, config.seed, *coords)):
        labels = arrays.labels[idx]
        if augment and aug.enabled and (aug.max_rotation > 0 or aug.max_translation > 0):
            labels = np.stack(
                [
                    augment_labels(
                        labels[i],
                        aug.max_rotation,
                        aug.max_translation,
                        derive_seed(config.seed, *coords, b, i),
                    )
                    for i in range(len(idx))
                ]
            )
        yield (
            b,
            torch.from_numpy(labels.astype(np.int64)),
            torch.from_numpy(arrays.y[idx]),
            torch.from_numpy(arrays.y_k[idx]),
        )


def labels_tensor(arrays: SubjectArrays, indices: Optional[np.ndarray] = None) -> torch.Tensor:
    labels = arrays.labels if indices is None else arrays.labels[indices]
    return torch.from_numpy(labels.astype(np.int64))
