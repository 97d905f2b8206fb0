"""Decoding latent-space summaries back to label-map sequences."""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import torch

from ..errors import DegenerateInputError, RejectedInputError
from ..models.phantom import LabeledSubject, SegSequence, uniform_phases
from ..network.encoding import argmax_labels
from ..network.vae import ConceptVAE
from ..pipeline.data import SubjectArrays
from ..pipeline.inference import predict
from ..utils.logging import get_logger
from .latents import as_arrays, collect_latents

logger = get_logger("cinevae.interpret")

PREDICTION_THRESHOLD = 0.5


class Selector(Enum):
    LABEL = "label"
    PREDICTION = "prediction"


@dataclass
class TraversalPoint:
    lam: float
    sequence: SegSequence
    y_hat: float


@torch.no_grad()
def decode_means(model: ConceptVAE, means: np.ndarray) -> torch.Tensor:
    """(T, D) latent means -> (T, S, C, H, W) class probabilities."""
    z = torch.as_tensor(np.asarray(means), dtype=next(model.parameters()).dtype)
    model.eval()
    probs = model.decode(z)
    model.train()
    return probs


def to_sequence(probs: torch.Tensor) -> SegSequence:
    labels = argmax_labels(probs)
    return SegSequence(labels, uniform_phases(len(labels)))


@torch.no_grad()
def score_means(model: ConceptVAE, means: np.ndarray) -> float:
    """classify_primary on one (T, D) mean sequence."""
    m = torch.as_tensor(np.asarray(means), dtype=next(model.parameters()).dtype)
    model.eval()
    y_hat = float(model.classify_primary(m.unsqueeze(0))[0])
    model.train()
    return y_hat


def select_group(
    model: ConceptVAE,
    arrays: SubjectArrays,
    k: int,
    selector: Selector | str = Selector.LABEL,
    positive: bool = True,
    batch_size: int = 16,
) -> np.ndarray:
    """Indices of the subjects whose concept k is (predicted) positive, or negative."""
    selector = Selector(selector)
    if not 0 <= k < arrays.y_k.shape[1]:
        raise RejectedInputError(f"concept index {k} out of range (K={arrays.y_k.shape[1]})")
    if selector is Selector.LABEL:
        member = arrays.y_k[:, k] == (1 if positive else 0)
    else:
        scores = predict(model, arrays, batch_size, with_dice=False).y_k_hat[:, k]
        member = (scores >= PREDICTION_THRESHOLD) == positive
    return np.flatnonzero(member)


def concept_mean_decode(
    model: ConceptVAE,
    data: Sequence[LabeledSubject] | SubjectArrays,
    k: int = 0,
    selector: Selector | str = Selector.LABEL,
    positive: bool = True,
    soft: bool = False,
    batch_size: int = 16,
) -> SegSequence | np.ndarray:
    """
    Decode the framewise mean latent sequence of a concept group.

    Args:
        model: Trained model
        data: Subjects to select from
        k: Concept index
        selector: "label" (ground-truth y_k) or "prediction" (concept head >= 0.5)
        positive: Select the concept-positive group (False: the negative group)
        soft: Return averaged class probabilities (T, S, C, H, W) instead of labels
        batch_size: Encoding batch size

    Returns:
        Decoded SegSequence of T frames, or the probability array when soft

    Raises:
        DegenerateInputError: the selected group is empty
    """
    arrays = as_arrays(model, data)
    group = select_group(model, arrays, k, selector, positive, batch_size)
    if len(group) == 0:
        raise DegenerateInputError(
            f"no subject selected for concept {k} ({Selector(selector).value}, positive={positive})"
        )
    latents = collect_latents(model, arrays.subset(group), batch_size)
    means = latents.per_frame().mean(axis=0)
    logger.info(f"Decoding concept {k} group mean over {len(group)} subjects")
    probs = decode_means(model, means)
    if soft:
        return probs.cpu().numpy()
    return to_sequence(probs)


def _span_points(steps: int, span: float) -> np.ndarray:
    if steps < 1:
        raise RejectedInputError(f"steps must be >= 1, got {steps}")
    if steps == 1:
        return np.zeros(1)
    return np.linspace(-span, span, steps)


def traverse_boundary(
    model: ConceptVAE,
    data: Sequence[LabeledSubject] | SubjectArrays,
    steps: int = 9,
    span: float = 1.5,
    batch_size: int = 16,
) -> list[TraversalPoint]:
    """
    Walk the line through the two primary class means and decode each point.

    Points are M_mid + lam * (mean(M | y=1) - mean(M | y=0)) for lam evenly
    spaced in [-span, span]; each is scored by the primary head.

    Raises:
        DegenerateInputError: one primary class is missing
    """
    latents = collect_latents(model, as_arrays(model, data), batch_size)
    positive = latents.values[latents.y == 1]
    negative = latents.values[latents.y == 0]
    if len(positive) == 0 or len(negative) == 0:
        raise DegenerateInputError("boundary traversal needs both primary classes")
    mean_pos = positive.mean(axis=0)
    mean_neg = negative.mean(axis=0)
    direction = mean_pos - mean_neg
    midpoint = (mean_pos + mean_neg) / 2

    points = []
    for lam in _span_points(steps, span):
        means = (midpoint + lam * direction).reshape(latents.frames, latents.latent_dim)
        points.append(
            TraversalPoint(
                lam=float(lam),
                sequence=to_sequence(decode_means(model, means)),
                y_hat=score_means(model, means),
            )
        )
    logger.info(
        f"Boundary traversal: y_hat {points[0].y_hat:.3f} at lam={points[0].lam:g} -> "
        f"{points[-1].y_hat:.3f} at lam={points[-1].lam:g}"
    )
    return points


def traverse_remainder(
    model: ConceptVAE,
    data: Sequence[LabeledSubject] | SubjectArrays,
    dim: int,
    steps: int = 9,
    span: float = 1.5,
    batch_size: int = 16,
    scale: Optional[float] = None,
) -> list[TraversalPoint]:
    """
    Sweep one latent coordinate outside every concept subset, all frames at once.

    The sweep starts from the mean latent sequence; dim moves by lam * scale,
    where scale defaults to that coordinate's standard deviation over
    subjects and frames.

    Raises:
        RejectedInputError: dim is not in the reserved remainder
    """
    remainder = model.config.remainder_indices()
    if dim not in remainder:
        raise RejectedInputError(
            f"latent dimension {dim} is read by a concept head; remainder is {remainder}"
        )
    latents = collect_latents(model, as_arrays(model, data), batch_size)
    per_frame = latents.per_frame()
    base = per_frame.mean(axis=0)
    if scale is None:
        scale = float(per_frame[..., dim].std()) or 1.0

    points = []
    for lam in _span_points(steps, span):
        means = base.copy()
        means[:, dim] += lam * scale
        points.append(
            TraversalPoint(
                lam=float(lam),
                sequence=to_sequence(decode_means(model, means)),
                y_hat=score_means(model, means),
            )
        )
    return points
