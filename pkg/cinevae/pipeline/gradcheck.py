"""Central finite-difference check of the joint loss gradients."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..config import ExperimentConfig, LossWeights, preset_config
from ..errors import RejectedInputError
from ..network.checkpoint import build_model
from ..network.losses import combine_loss_terms, kl_term, total_loss
from ..network.vae import ConceptVAE
from ..utils.logging import get_logger
from ..utils.seeding import derive_seed

logger = get_logger("cinevae.pipeline")

STEP = 1e-5
RELATIVE_FLOOR = 1e-5
MAX_PARAMETERS = 10_000
GRADCHECK_STREAM = 7


@dataclass
class GradientBatch:
    labels: torch.Tensor   # (B, T, S, H, W) int64
    y: torch.Tensor        # (B,)
    y_k: torch.Tensor      # (B, K)
    epsilon: torch.Tensor  # (B, T, D) float64


@dataclass
class GradCheckResult:
    max_relative_error: float
    worst_parameter: str
    worst_index: int
    checked: int

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def _collect(model: ConceptVAE) -> dict[str, Optional[torch.Tensor]]:
    grads = {
        name: None if p.grad is None else p.grad.detach().clone()
        for name, p in model.named_parameters()
    }
    model.zero_grad(set_to_none=True)
    return grads


def random_batch(config: ExperimentConfig, seed: int, batch_size: int = 2) -> GradientBatch:
    """Random labels and targets plus one fixed reparameterization draw."""
    m = config.model
    rng = np.random.default_rng(derive_seed(seed, GRADCHECK_STREAM))
    labels = rng.integers(0, m.class_count, size=(batch_size, m.frames, m.slices, m.height, m.width))
    y = np.arange(batch_size) % 2
    y_k = rng.integers(0, 2, size=(batch_size, len(m.concepts)))
    epsilon = rng.standard_normal((batch_size, m.frames, m.latent_dim))
    return GradientBatch(
        labels=torch.from_numpy(labels.astype(np.int64)),
        y=torch.from_numpy(y.astype(np.int64)),
        y_k=torch.from_numpy(y_k.astype(np.int64)),
        epsilon=torch.from_numpy(epsilon),
    )


def batch_loss(model: ConceptVAE, batch: GradientBatch, weights: LossWeights) -> torch.Tensor:
    out = model(batch.labels, epsilon=batch.epsilon)
    loss, _ = total_loss(out, batch.labels, batch.y, batch.y_k, weights)
    return loss


def loss_gradients(
    model: ConceptVAE, batch: GradientBatch, weights: LossWeights
) -> dict[str, Optional[torch.Tensor]]:
    """Analytic gradient of every parameter; None where no loss term reaches it."""
    model.zero_grad(set_to_none=True)
    batch_loss(model, batch, weights).backward()
    return _collect(model)


def kl_path_gradients(
    model: ConceptVAE, batch: GradientBatch, beta: float
) -> dict[str, Optional[torch.Tensor]]:
    """Gradients of the beta-weighted KL term alone (reconstruction and heads held at zero)."""
    model.zero_grad(set_to_none=True)
    latent = model.encode_sequences(batch.labels)
    kl = kl_term(latent.mu, latent.log_sigma)
    weights = LossWeights(beta=beta, gamma=0.0, alpha=[0.0] * len(model.config.concepts))
    loss = combine_loss_terms(torch.zeros_like(kl), kl, None, [None] * len(weights.alpha), weights)
    if loss.requires_grad:  # beta = 0 leaves a constant
        loss.backward()
    return _collect(model)


@torch.no_grad()
def _numeric(
    model: ConceptVAE, batch: GradientBatch, weights: LossWeights, param: torch.Tensor, i: int
) -> float:
    flat = param.view(-1)
    original = flat[i].item()
    flat[i] = original + STEP
    plus = batch_loss(model, batch, weights).item()
    flat[i] = original - STEP
    minus = batch_loss(model, batch, weights).item()
    flat[i] = original
    return (plus - minus) / (2 * STEP)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def gradient_check(
    config: Optional[ExperimentConfig] = None, seed: int = 0, batch_size: int = 2
) -> GradCheckResult:
    """
    Compare analytic and central-difference gradients of the joint loss.

    Runs in float64 on a fixed batch and a fixed reparameterization draw, so
    the loss is a deterministic function of the weights.

    Args:
        config: Tiny experiment config (default: the "tiny" preset)
        seed: Seed for the weights and the batch
        batch_size: Subjects in the fixed batch

    Returns:
        GradCheckResult with the largest relative error over all parameters

    Raises:
        RejectedInputError: model too large for an exhaustive check
    """
    config = config or preset_config("tiny")
    model = build_model(config.model, seed, dtype=torch.float64)
    count = sum(p.numel() for p in model.parameters())
    if count > MAX_PARAMETERS:
        raise RejectedInputError(
            f"gradient check needs <= {MAX_PARAMETERS} parameters, model has {count}"
        )
    model.eval()
    weights = config.train.weights
    batch = random_batch(config, seed, batch_size)
    analytic = loss_gradients(model, batch, weights)

    worst = GradCheckResult(0.0, "", -1, 0)
    checked = 0
    for name, param in model.named_parameters():
        grad = analytic[name]
        for i in range(param.numel()):
            a = 0.0 if grad is None else float(grad.view(-1)[i])
            err = relative_error(a, _numeric(model, batch, weights, param, i))
            checked += 1
            if err > worst.max_relative_error:
                worst = GradCheckResult(err, name, i, 0)
    worst.checked = checked
    logger.info(
        f"Gradient check: {checked} parameters, max relative error {worst.max_relative_error:.3e}"
        + (f" at {worst.worst_parameter}[{worst.worst_index}]" if worst.worst_parameter else "")
    )
    return worst
