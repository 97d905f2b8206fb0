"""Per-subject latent matrices, their 2-D PCA and a linear probe on it."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import StratifiedKFold, cross_val_score

from ..errors import DegenerateInputError, RejectedInputError
from ..models.phantom import LabeledSubject
from ..network.vae import ConceptVAE
from ..pipeline.data import SubjectArrays, to_arrays
from ..pipeline.inference import predict


@dataclass
class LatentMatrix:
    """Row i is subject i's T latent means concatenated in frame order."""
    values: np.ndarray     # (n, T * D)
    y: np.ndarray          # (n,), -1 when unlabeled
    y_k: np.ndarray        # (n, K)
    frames: int
    latent_dim: int

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def per_frame(self) -> np.ndarray:
        """(n, T, D) view of the rows."""
        return self.values.reshape(len(self), self.frames, self.latent_dim)


@dataclass
class PcaProjection:
    coords: np.ndarray              # (n, 2)
    explained_variance: np.ndarray  # (2,) fractions of the total variance
    components: np.ndarray          # (2, T * D)
    mean: np.ndarray                # (T * D,)


def as_arrays(model: ConceptVAE, data: Sequence[LabeledSubject] | SubjectArrays) -> SubjectArrays:
    if isinstance(data, SubjectArrays):
        return data
    return to_arrays(data, model.config)


def collect_latents(
    model: ConceptVAE, data: Sequence[LabeledSubject] | SubjectArrays, batch_size: int = 16
) -> LatentMatrix:
    """Encode every subject and flatten its mean sequence into one row."""
    arrays = as_arrays(model, data)
    preds = predict(model, arrays, batch_size, with_dice=False)
    n, t, d = preds.mu.shape
    return LatentMatrix(
        values=preds.mu.reshape(n, t * d).astype(np.float64),
        y=arrays.y.copy(),
        y_k=arrays.y_k.copy(),
        frames=t,
        latent_dim=d,
    )


def pca2(matrix: LatentMatrix | np.ndarray) -> PcaProjection:
    """
    Project mean-centred rows onto their top two principal directions.

    Each component is sign-fixed so its largest-magnitude loading is positive.

    Raises:
        DegenerateInputError: fewer than 3 rows
    """
    x = np.asarray(matrix.values if isinstance(matrix, LatentMatrix) else matrix, dtype=np.float64)
    if x.ndim != 2:
        raise RejectedInputError(f"PCA needs a 2-D matrix, got shape {x.shape}")
    if x.shape[0] < 3:
        raise DegenerateInputError(f"PCA needs at least 3 rows, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centred = x - mean
    _, singular, vt = np.linalg.svd(centred, full_matrices=False)

    components = np.zeros((2, x.shape[1]))
    kept = min(2, vt.shape[0])
    components[:kept] = vt[:kept]
    for i in range(kept):
        if components[i, np.argmax(np.abs(components[i]))] < 0:
            components[i] = -components[i]

    variance = singular**2
    explained = np.zeros(2)
    if variance.sum() > 0:
        explained[:kept] = variance[:kept] / variance.sum()
    return PcaProjection(
        coords=centred @ components.T,
        explained_variance=explained,
        components=components,
        mean=mean,
    )


def linear_probe(coords: np.ndarray, labels: np.ndarray, seed: int = 0, folds: int = 5) -> float:
    """
    Accuracy of a logistic-regression probe on low-dimensional coordinates.

    Cross-validated (stratified, up to `folds` folds) when every class has at
    least two members, training accuracy otherwise.

    Raises:
        DegenerateInputError: a single class
    """
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise DegenerateInputError("linear probe needs both classes")
    probe = LogisticRegression()
    splits = min(folds, int(counts.min()))
    if splits >= 2:
        cv = StratifiedKFold(n_splits=splits, shuffle=True, random_state=seed)
        return float(np.mean(cross_val_score(probe, coords, y, cv=cv, scoring="accuracy")))
    return float(probe.fit(coords, y).score(coords, y))
