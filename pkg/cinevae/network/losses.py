"""Terms of the joint objective and their weighted combination.

    total = mean_b[(1/T) sum_t (recon_t + beta * kl_t)] + gamma * cls(y) + sum_k alpha_k * cls(y_k)

Terms whose weight is zero are left out of the sum entirely, so every
specialisation (pure VAE, VAE + primary) is exactly its own sub-loss and
contributes no gradient through the skipped heads.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch

from ..config import LossWeights
from ..errors import RejectedInputError
from .vae import BatchOutput

PROB_FLOOR = 1e-7


def kl_term(mu: torch.Tensor, log_sigma: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, sigma^2) || N(0, 1)) summed over the last dimension."""
    if mu.shape != log_sigma.shape:
        raise RejectedInputError("mu and log_sigma shapes differ")
    return 0.5 * torch.sum(mu**2 + torch.exp(2.0 * log_sigma) - 1.0 - 2.0 * log_sigma, dim=-1)


def recon_term(target: torch.Tensor, probs: torch.Tensor) -> torch.Tensor:
    """
    Mean cross-entropy over slices and pixels.

    Args:
        target: (..., S, H, W) class ids, or (..., S, C, H, W) one-hot
        probs: (..., S, C, H, W) class probabilities

    Returns:
        (...) per-frame reconstruction loss
    """
    if target.dim() == probs.dim():
        if target.shape != probs.shape:
            raise RejectedInputError("one-hot target and probabilities differ in shape")
        p_true = (target.to(probs.dtype) * probs).sum(dim=-3)
    else:
        expected = probs.shape[:-3] + probs.shape[-2:]
        if target.shape != expected:
            raise RejectedInputError(f"target shape {tuple(target.shape)} != {tuple(expected)}")
        p_true = probs.gather(-3, target.long().unsqueeze(-3)).squeeze(-3)
    return -torch.log(p_true.clamp(min=PROB_FLOOR)).mean(dim=(-3, -2, -1))


def cls_term(y: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    """Elementwise binary cross-entropy with the probability clamped to [1e-7, 1 - 1e-7]."""
    y = y.to(y_hat.dtype)
    p = y_hat.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))


@dataclass
class LossBreakdown:
    """Scalar components of one evaluation of the joint loss, for logging."""
    total: float
    recon: float
    kl: float
    primary: Optional[float] = None
    concepts: list[Optional[float]] = field(default_factory=list)


def combine_loss_terms(
    recon: torch.Tensor,
    kl: torch.Tensor,
    primary: Optional[torch.Tensor],
    concepts: Sequence[Optional[torch.Tensor]],
    weights: LossWeights,
) -> torch.Tensor:
    """
    Weighted sum of already-computed terms.

    Args:
        recon: (B, T) per-frame reconstruction losses
        kl: (B, T) per-frame KL terms
        primary: scalar primary classification loss (ignored when gamma is 0)
        concepts: scalar concept losses (ignored where alpha_k is 0)
        weights: Loss weights

    Returns:
        Scalar total
    """
    if len(concepts) != len(weights.alpha):
        raise RejectedInputError(
            f"{len(concepts)} concept terms for {len(weights.alpha)} concept weights"
        )
    per_frame = recon + weights.beta * kl if weights.beta != 0 else recon
    total = per_frame.mean(dim=-1).mean()
    if weights.gamma != 0:
        if primary is None:
            raise RejectedInputError("gamma > 0 needs the primary classification term")
        total = total + weights.gamma * primary
    for alpha, term in zip(weights.alpha, concepts):
        if alpha != 0:
            if term is None:
                raise RejectedInputError("alpha_k > 0 needs the concept classification term")
            total = total + alpha * term
    return total


def total_loss(
    batch: BatchOutput,
    labels: torch.Tensor,
    y: Optional[torch.Tensor],
    y_k: Optional[torch.Tensor],
    weights: LossWeights,
) -> tuple[torch.Tensor, LossBreakdown]:
    """
    Joint loss of a forward pass.

    Args:
        batch: Model output (must be decoded)
        labels: (B, T, S, H, W) input class ids
        y: (B,) primary labels, needed when gamma > 0
        y_k: (B, K) concept labels, needed where alpha_k > 0
        weights: Loss weights

    Returns:
        (total loss tensor, LossBreakdown)
    """
    if batch.recon is None:
        raise RejectedInputError("total_loss needs decoded reconstructions")
    recon = recon_term(labels, batch.recon)
    kl = kl_term(batch.latent.mu, batch.latent.log_sigma)

    primary = None
    if weights.gamma != 0:
        if y is None:
            raise RejectedInputError("gamma > 0 needs primary labels")
        primary = cls_term(y, batch.y_hat).mean()

    concepts: list[Optional[torch.Tensor]] = []
    for k, alpha in enumerate(weights.alpha):
        if alpha == 0:
            concepts.append(None)
            continue
        if y_k is None or y_k.shape[1] <= k:
            raise RejectedInputError(f"alpha_{k} > 0 needs concept labels for concept {k}")
        concepts.append(cls_term(y_k[:, k], batch.y_k_hat[:, k]).mean())

    total = combine_loss_terms(recon, kl, primary, concepts, weights)
    breakdown = LossBreakdown(
        total=float(total.detach()),
        recon=float(recon.detach().mean(dim=-1).mean()),
        kl=float(kl.detach().mean(dim=-1).mean()),
        primary=None if primary is None else float(primary.detach()),
        concepts=[None if c is None else float(c.detach()) for c in concepts],
    )
    return total, breakdown


def classification_loss(batch: BatchOutput, y: torch.Tensor) -> torch.Tensor:
    """Primary cross-entropy alone (the baseline objective)."""
    return cls_term(y, batch.y_hat).mean()
