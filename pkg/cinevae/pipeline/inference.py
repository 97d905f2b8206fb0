"""Batched forward passes over stored subjects (no gradients, no augmentation)."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from ..evaluation.metrics import dice
from ..network.encoding import argmax_labels
from ..network.vae import ConceptVAE
from .data import SubjectArrays, labels_tensor


@dataclass
class Predictions:
    mu: np.ndarray                   # (N, T, D)
    log_sigma: np.ndarray            # (N, T, D)
    y_hat: np.ndarray                # (N,)
    y_k_hat: np.ndarray              # (N, K)
    dice: Optional[np.ndarray] = None  # (N,) reconstruction Dice of argmax(decode(mu))


@torch.no_grad()
def predict(
    model: ConceptVAE, arrays: SubjectArrays, batch_size: int = 16, with_dice: bool = True
) -> Predictions:
    model.eval()
    mus, sigmas, ys, yks, dices = [], [], [], [], []
    for start in range(0, len(arrays), batch_size):
        idx = np.arange(start, min(start + batch_size, len(arrays)))
        labels = labels_tensor(arrays, idx)
        out = model(labels, decode=False)
        mus.append(out.latent.mu.cpu().numpy())
        sigmas.append(out.latent.log_sigma.cpu().numpy())
        ys.append(out.y_hat.cpu().numpy())
        yks.append(out.y_k_hat.cpu().numpy())
        if with_dice:
            b, t, d = out.latent.mu.shape
            recon = argmax_labels(model.decode(out.latent.mu.reshape(b * t, d)))
            recon = recon.reshape(arrays.labels[idx].shape)
            dices.extend(dice(arrays.labels[i], recon[j]) for j, i in enumerate(idx))
    model.train()
    return Predictions(
        mu=np.concatenate(mus),
        log_sigma=np.concatenate(sigmas),
        y_hat=np.concatenate(ys).astype(np.float64),
        y_k_hat=np.concatenate(yks).astype(np.float64),
        dice=np.asarray(dices) if with_dice else None,
    )
