"""Torch VAE, latent classifiers, losses and checkpoints."""

from .checkpoint import Checkpoint, build_model, describe_model, load_checkpoint, save_checkpoint
from .encoding import argmax_labels, labels_to_tensor, one_hot
from .losses import (
    LossBreakdown,
    classification_loss,
    cls_term,
    combine_loss_terms,
    kl_term,
    recon_term,
    total_loss,
)
from .vae import BatchOutput, ConceptVAE, LatentClassifier, LatentCode

__all__ = [
    "Checkpoint",
    "build_model",
    "describe_model",
    "load_checkpoint",
    "save_checkpoint",
    "argmax_labels",
    "labels_to_tensor",
    "one_hot",
    "LossBreakdown",
    "classification_loss",
    "cls_term",
    "combine_loss_terms",
    "kl_term",
    "recon_term",
    "total_loss",
    "BatchOutput",
    "ConceptVAE",
    "LatentClassifier",
    "LatentCode",
]
