"""VAE over segmentation frames with a primary and per-concept latent classifiers."""

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import ModelConfig
from ..errors import RejectedInputError
from .blocks import ResidualDown, ResidualUp
from .encoding import one_hot


@dataclass
class LatentCode:
    """Per-frame posterior parameters, each (B, T, D)."""
    mu: torch.Tensor
    log_sigma: torch.Tensor


@dataclass
class BatchOutput:
    recon: Optional[torch.Tensor]  # (B, T, S, C, H, W) class probabilities; None when not decoded
    latent: LatentCode
    y_hat: torch.Tensor            # (B,)
    y_k_hat: torch.Tensor          # (B, K)


class Encoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        blocks = []
        in_channels = config.input_channels
        for channels in config.encoder_channels:
            blocks.append(ResidualDown(in_channels, channels))
            in_channels = channels
        self.blocks = nn.Sequential(*blocks)
        self.mu = nn.Linear(in_channels, config.latent_dim)
        self.log_sigma = nn.Linear(in_channels, config.latent_dim)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        features = self.blocks(x).mean(dim=(2, 3))
        return self.mu(features), self.log_sigma(features)


class Decoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.slices = config.slices
        self.classes = config.class_count
        self.bottleneck = config.bottleneck_size
        widths = list(reversed(config.encoder_channels)) + [config.encoder_channels[0]]
        self.first_channels = widths[0]
        h, w = self.bottleneck
        self.project = nn.Linear(config.latent_dim, widths[0] * h * w)
        self.blocks = nn.Sequential(
            *(ResidualUp(widths[i], widths[i + 1]) for i in range(len(widths) - 1))
        )
        self.head = nn.Conv2d(widths[-1], config.input_channels, 1)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h, w = self.bottleneck
        x = F.relu(self.project(z)).view(-1, self.first_channels, h, w)
        logits = self.head(self.blocks(x))
        n, _, out_h, out_w = logits.shape
        logits = logits.view(n, self.slices, self.classes, out_h, out_w)
        return torch.softmax(logits, dim=2)


class LatentClassifier(nn.Module):
    """
    Shared per-frame embedding, order-preserving concatenation, then an MLP.

    Input (B, T, d_in) -> probability (B,). Frame order matters: the first
    hidden layer sees frame t in its own block of T * d_emb inputs.
    """

    def __init__(self, in_features: int, frames: int, embed_dim: int, hidden: list[int]):
        super().__init__()
        self.in_features = in_features
        self.frames = frames
        self.embed = nn.Linear(in_features, embed_dim)
        layers: list[nn.Module] = []
        width = frames * embed_dim
        for h in hidden:
            layers += [nn.Linear(width, h), nn.ReLU()]
            width = h
        layers.append(nn.Linear(width, 1))
        self.mlp = nn.Sequential(*layers)

    def forward(self, m: torch.Tensor) -> torch.Tensor:
        if m.dim() != 3 or m.shape[1:] != (self.frames, self.in_features):
            raise RejectedInputError(
                f"classifier expects (B, {self.frames}, {self.in_features}), got {tuple(m.shape)}"
            )
        embedded = F.relu(self.embed(m)).flatten(start_dim=1)
        return torch.sigmoid(self.mlp(embedded)).squeeze(-1)


class ConceptVAE(nn.Module):
    """Encoder/decoder pair plus the primary head and one head per concept subset."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.decoder = Decoder(config)
        self.primary = LatentClassifier(
            config.latent_dim, config.frames, config.embed_dim, config.classifier_hidden
        )
        self.concept_heads = nn.ModuleList(
            LatentClassifier(c.size, config.frames, config.embed_dim, config.classifier_hidden)
            for c in config.concepts
        )

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.config.slices, self.config.height, self.config.width

    def _dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def encode(self, frames: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """
        Encode a batch of frames.

        Args:
            frames: (N, S, H, W) integer class ids or (N, S * 4, H, W) one-hot

        Returns:
            (mu, log_sigma), each (N, D)
        """
        s, h, w = self.frame_shape
        if frames.dtype.is_floating_point:
            expected = (self.config.input_channels, h, w)
            x = frames
        else:
            expected = (s, h, w)
            x = one_hot(frames, self._dtype()) if frames.dim() == 4 else frames
        if frames.dim() != 4 or tuple(frames.shape[1:]) != expected:
            raise RejectedInputError(f"frames must be (N, {expected}), got {tuple(frames.shape)}")
        return self.encoder(x)

    @staticmethod
    def reparameterize(
        mu: torch.Tensor, log_sigma: torch.Tensor, epsilon: torch.Tensor
    ) -> torch.Tensor:
        if mu.shape != log_sigma.shape or mu.shape != epsilon.shape:
            raise RejectedInputError("mu, log_sigma and epsilon shapes differ")
        return mu + torch.exp(log_sigma) * epsilon

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        """(N, D) -> (N, S, C, H, W) per-pixel class probabilities."""
        if z.dim() != 2 or z.shape[1] != self.config.latent_dim:
            raise RejectedInputError(
                f"z must be (N, {self.config.latent_dim}), got {tuple(z.shape)}"
            )
        return self.decoder(z)

    def classify_primary(self, m: torch.Tensor) -> torch.Tensor:
        """(B, T, D) latent means -> (B,) response probability."""
        return self.primary(m)

    def classify_concept(self, m: torch.Tensor, k: int) -> torch.Tensor:
        """(B, T, D) latent means -> (B,) probability of concept k, reading only its subset."""
        if not 0 <= k < len(self.concept_heads):
            raise RejectedInputError(f"concept index {k} out of range (K={len(self.concept_heads)})")
        spec = self.config.concepts[k]
        return self.concept_heads[k](m[..., spec.start : spec.stop])

    def encode_sequences(self, labels: torch.Tensor) -> LatentCode:
        """(B, T, S, H, W) class ids -> LatentCode."""
        if labels.dim() != 5 or labels.shape[1] != self.config.frames:
            raise RejectedInputError(
                f"sequences must be (B, {self.config.frames}, S, H, W), got {tuple(labels.shape)}"
            )
        b, t = labels.shape[:2]
        mu, log_sigma = self.encode(labels.reshape(b * t, *labels.shape[2:]))
        return LatentCode(mu.view(b, t, -1), log_sigma.view(b, t, -1))

    def forward(
        self,
        labels: torch.Tensor,
        epsilon: Optional[torch.Tensor] = None,
        generator: Optional[torch.Generator] = None,
        decode: bool = True,
    ) -> BatchOutput:
        """
        Full pass over (B, T, S, H, W) sequences.

        Classification always reads the latent means. Decoding reads samples
        mu + sigma * epsilon; epsilon is drawn from generator when not given.
        """
        latent = self.encode_sequences(labels)
        recon = None
        if decode:
            if epsilon is None:
                epsilon = torch.randn(
                    latent.mu.shape, generator=generator, dtype=latent.mu.dtype
                )
            z = self.reparameterize(latent.mu, latent.log_sigma, epsilon)
            b, t, d = z.shape
            recon = self.decode(z.reshape(b * t, d)).view(b, t, *self.decoder_output_shape)
        y_hat = self.classify_primary(latent.mu)
        if self.concept_heads:
            y_k_hat = torch.stack(
                [self.classify_concept(latent.mu, k) for k in range(len(self.concept_heads))], dim=1
            )
        else:
            y_k_hat = latent.mu.new_zeros((latent.mu.shape[0], 0))
        return BatchOutput(recon=recon, latent=latent, y_hat=y_hat, y_k_hat=y_k_hat)

    @property
    def decoder_output_shape(self) -> tuple[int, int, int, int]:
        c = self.config
        return c.slices, c.class_count, c.height, c.width

    def stage_parameters(self, stage: int) -> list[nn.Parameter]:
        """Parameters optimised in a training stage (1: VAE, 2: + primary, 3: all)."""
        params = list(self.encoder.parameters()) + list(self.decoder.parameters())
        if stage >= 2:
            params += list(self.primary.parameters())
        if stage >= 3:
            params += list(self.concept_heads.parameters())
        return params

    def parameter_counts(self) -> dict[str, int]:
        counts = {
            "encoder": sum(p.numel() for p in self.encoder.parameters()),
            "decoder": sum(p.numel() for p in self.decoder.parameters()),
            "primary": sum(p.numel() for p in self.primary.parameters()),
        }
        for spec, head in zip(self.config.concepts, self.concept_heads):
            counts[f"concept:{spec.name}"] = sum(p.numel() for p in head.parameters())
        counts["total"] = sum(p.numel() for p in self.parameters())
        return counts
