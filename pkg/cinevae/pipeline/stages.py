"""Single training stages.

Stage 1 optimises the VAE alone (gamma = alpha = 0), stage 2 adds the
primary head (alpha = 0), stage 3 trains everything. Each stage gets a fresh
Adam over exactly the parameters its loss reaches, so heads outside the
stage keep their weights bit for bit.
"""

import time
from collections.abc import Callable
from enum import Enum
from typing import Optional

import numpy as np
import torch

from ..config import LossWeights, TrainConfig
from ..errors import ConfigError, RejectedInputError
from ..evaluation.metrics import apply_threshold, confusion
from ..models.history import EpochRecord, TrainHistory
from ..network.losses import LossBreakdown, classification_loss, total_loss
from ..network.vae import ConceptVAE
from ..utils.logging import get_logger
from ..utils.seeding import torch_generator
from .data import SubjectArrays, iterate_batches, labels_tensor
from .inference import predict

logger = get_logger("cinevae.pipeline")

EVAL_STREAM = 99


class StagePhase(Enum):
    """Which data a stage is running over; part of every derived seed."""
    POOL = 0
    COHORT = 1
    LABELED = 2
    BASELINE = 3


def stage_weights(stage: int, weights: LossWeights) -> LossWeights:
    """Loss weights with the terms masked out that a stage does not train."""
    if stage == 1:
        return LossWeights(beta=weights.beta, gamma=0.0, alpha=[0.0] * len(weights.alpha))
    if stage == 2:
        return LossWeights(beta=weights.beta, gamma=weights.gamma, alpha=[0.0] * len(weights.alpha))
    if stage == 3:
        return weights.model_copy(deep=True)
    raise RejectedInputError(f"stage must be 1, 2 or 3, got {stage}")


def _check_labels(data: SubjectArrays, stage: int, weights: LossWeights) -> None:
    if stage >= 2 and weights.gamma != 0 and not data.has_primary_labels:
        raise ConfigError(f"stage {stage} needs primary labels for every subject", "train.cohort_path")
    for k, alpha in enumerate(weights.alpha):
        if stage == 3 and alpha != 0 and not data.has_concept_labels(k):
            raise ConfigError(f"stage 3 needs labels for concept {k}", "train.cohort_path")


def _adam(params: list[torch.nn.Parameter], config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        params, lr=config.learning_rate, betas=config.adam_betas, eps=config.adam_eps
    )


def _mean_breakdown(parts: list[tuple[int, LossBreakdown]]) -> LossBreakdown:
    n = sum(size for size, _ in parts)

    def avg(get: Callable[[LossBreakdown], Optional[float]]) -> Optional[float]:
        values = [(size, get(b)) for size, b in parts]
        if any(v is None for _, v in values):
            return None
        return sum(size * float(v) for size, v in values if v is not None) / n

    k = len(parts[0][1].concepts)
    return LossBreakdown(
        total=avg(lambda b: b.total) or 0.0,
        recon=avg(lambda b: b.recon) or 0.0,
        kl=avg(lambda b: b.kl) or 0.0,
        primary=avg(lambda b: b.primary),
        concepts=[avg(lambda b, i=i: b.concepts[i]) for i in range(k)],
    )


def half_threshold_bacc(labels: np.ndarray, scores: np.ndarray) -> Optional[float]:
    if len(labels) == 0 or np.any(labels < 0) or len(np.unique(labels)) < 2:
        return None
    return confusion(labels, apply_threshold(scores, 0.5)).balanced_accuracy


def validation_metrics(
    model: ConceptVAE, val: Optional[SubjectArrays], batch_size: int
) -> tuple[Optional[float], Optional[float], list[Optional[float]]]:
    """(mean Dice, primary BACC, concept BACCs) on a validation set at threshold 0.5."""
    if val is None or len(val) == 0:
        return None, None, []
    preds = predict(model, val, batch_size)
    val_dice = float(np.mean(preds.dice)) if preds.dice is not None else None
    concept_bacc = [
        half_threshold_bacc(val.y_k[:, k], preds.y_k_hat[:, k]) for k in range(val.y_k.shape[1])
    ]
    return val_dice, half_threshold_bacc(val.y, preds.y_hat), concept_bacc


def train_stage(
    model: ConceptVAE,
    data: SubjectArrays,
    stage: int,
    config: TrainConfig,
    epochs: Optional[int] = None,
    phase: StagePhase = StagePhase.LABELED,
    val: Optional[SubjectArrays] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> tuple[ConceptVAE, TrainHistory]:
    """
    Run one training stage in place.

    Args:
        model: Model to update
        data: Training subjects (labels required for stages 2 and 3)
        stage: 1, 2 or 3
        config: Training settings; the seed fixes batch order, augmentation and sampling noise
        epochs: Epoch count (default: config.stage_epochs[stage - 1])
        phase: Data phase, recorded in the history and mixed into derived seeds
        val: Optional validation subjects, never augmented
        on_epoch: Callback receiving each EpochRecord as it completes

    Returns:
        (model, TrainHistory)

    Raises:
        ConfigError: stage 2 or 3 without the labels its loss needs
    """
    weights = stage_weights(stage, config.weights)
    _check_labels(data, stage, weights)
    epochs = config.stage_epochs[stage - 1] if epochs is None else epochs
    history = TrainHistory()
    if epochs == 0 or len(data) == 0:
        return model, history

    torch.use_deterministic_algorithms(True, warn_only=True)
    optimizer = _adam(model.stage_parameters(stage), config)
    model.train()
    for epoch in range(epochs):
        started = time.perf_counter()
        parts: list[tuple[int, LossBreakdown]] = []
        for b, labels, y, y_k in iterate_batches(data, config, stage, phase.value, epoch):
            generator = torch_generator(config.seed, stage, phase.value, epoch, b)
            out = model(labels, generator=generator)
            loss, breakdown = total_loss(out, labels, y, y_k, weights)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            parts.append((len(labels), breakdown))

        mean = _mean_breakdown(parts)
        val_dice, val_bacc, val_concepts = validation_metrics(model, val, config.batch_size)
        record = EpochRecord(
            stage=stage,
            phase=phase.name.lower(),
            epoch=epoch,
            total=mean.total,
            recon=mean.recon,
            kl=mean.kl,
            primary=mean.primary,
            concepts=mean.concepts,
            val_dice=val_dice,
            val_primary_bacc=val_bacc,
            val_concept_bacc=val_concepts,
            seconds=time.perf_counter() - started,
        )
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.info(
            f"Stage {stage} [{record.phase}] epoch {epoch + 1}/{epochs}: "
            f"total={mean.total:.4f} recon={mean.recon:.4f} kl={mean.kl:.4f}"
            + (f" cls={mean.primary:.4f}" if mean.primary is not None else "")
            + (f" val_dice={val_dice:.4f}" if val_dice is not None else "")
            + (f" val_bacc={val_bacc:.4f}" if val_bacc is not None else "")
        )
    return model, history


def train_baseline(
    model: ConceptVAE,
    data: SubjectArrays,
    config: TrainConfig,
    epochs: int,
) -> tuple[ConceptVAE, TrainHistory]:
    """Encoder + primary head trained on the primary cross-entropy only (no decoder, no KL)."""
    if not data.has_primary_labels:
        raise ConfigError("the baseline needs primary labels for every subject", "train.cohort_path")
    history = TrainHistory()
    if epochs == 0:
        return model, history
    torch.use_deterministic_algorithms(True, warn_only=True)
    params = list(model.encoder.parameters()) + list(model.primary.parameters())
    optimizer = _adam(params, config)
    model.train()
    phase = StagePhase.BASELINE
    for epoch in range(epochs):
        started = time.perf_counter()
        total, count = 0.0, 0
        for _, labels, y, _ in iterate_batches(data, config, 0, phase.value, epoch):
            out = model(labels, decode=False)
            loss = classification_loss(out, y)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(labels)
            count += len(labels)
        history.append(
            EpochRecord(
                stage=0,
                phase="baseline",
                epoch=epoch,
                total=total / count,
                recon=0.0,
                kl=0.0,
                primary=total / count,
                seconds=time.perf_counter() - started,
            )
        )
        logger.debug(f"Baseline epoch {epoch + 1}/{epochs}: cls={total / count:.4f}")
    return model, history


@torch.no_grad()
def dataset_loss(
    model: ConceptVAE, data: SubjectArrays, weights: LossWeights, seed: int, batch_size: int = 16
) -> float:
    """Mean joint loss over a dataset without augmentation, with fixed sampling noise."""
    total, count = 0.0, 0
    for b, start in enumerate(range(0, len(data), batch_size)):
        idx = np.arange(start, min(start + batch_size, len(data)))
        labels = labels_tensor(data, idx)
        out = model(labels, generator=torch_generator(seed, EVAL_STREAM, b))
        y = torch.from_numpy(data.y[idx]) if weights.gamma != 0 else None
        y_k = torch.from_numpy(data.y_k[idx]) if any(a != 0 for a in weights.alpha) else None
        loss, _ = total_loss(out, labels, y, y_k, weights)
        total += float(loss) * len(idx)
        count += len(idx)
    return total / count
