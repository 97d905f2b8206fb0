"""Model checkpoints: weights, configs, config hash and the training RNG position."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import torch

from ..config import LossWeights, ModelConfig
from ..errors import RejectedInputError
from ..utils.seeding import derive_seed, seeded_torch
from .vae import ConceptVAE

CHECKPOINT_VERSION = 1
INIT_STREAM = 0


def build_model(config: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> ConceptVAE:
    """Construct a model whose initial weights depend only on (config, seed)."""
    with seeded_torch(derive_seed(seed, INIT_STREAM)):
        model = ConceptVAE(config)
    return model.to(dtype)


@dataclass
class Checkpoint:
    model: ConceptVAE
    model_config: ModelConfig
    weights: LossWeights
    config_hash: str
    stage: int
    rng_state: dict[str, int] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(
    path: Path,
    model: ConceptVAE,
    weights: LossWeights,
    config_hash: str,
    stage: int,
    rng_state: Optional[dict[str, int]] = None,
    extra: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Write a checkpoint with torch.save.

    rng_state records where the deterministic stream stands ({seed, stage,
    epoch}); every later random draw is derived from it, so loading and
    continuing reproduces an uninterrupted run.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "state_dict": model.state_dict(),
        "model_config": model.config.model_dump(mode="json"),
        "loss_weights": weights.model_dump(mode="json"),
        "config_hash": config_hash,
        "stage": stage,
        "rng_state": dict(rng_state or {}),
        "extra": dict(extra or {}),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise RejectedInputError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise RejectedInputError(f"unsupported checkpoint version {payload.get('version')}")
    model_config = ModelConfig.model_validate(payload["model_config"])
    model = ConceptVAE(model_config)
    state = payload["state_dict"]
    model.to(next(iter(state.values())).dtype)
    model.load_state_dict(state)
    return Checkpoint(
        model=model,
        model_config=model_config,
        weights=LossWeights.model_validate(payload["loss_weights"]),
        config_hash=payload["config_hash"],
        stage=int(payload["stage"]),
        rng_state={k: int(v) for k, v in payload["rng_state"].items()},
        extra=payload["extra"],
    )


def describe_model(model: ConceptVAE) -> str:
    """Human-readable configuration and parameter counts."""
    lines = ["=== Model ==="]
    config = model.config
    lines.append(
        f"Input: S={config.slices} T={config.frames} H={config.height} W={config.width} "
        f"({config.input_channels} one-hot channels)"
    )
    lines.append(f"Latent: D={config.latent_dim}, remainder={len(config.remainder_indices())} dims")
    lines.append(f"Encoder channels: {config.encoder_channels} -> bottleneck {config.bottleneck_size}")
    for spec in config.concepts:
        lines.append(f"Concept {spec.name}: latent [{spec.start}, {spec.stop})")
    lines.append("")
    lines.append("=== Parameters ===")
    for name, count in model.parameter_counts().items():
        lines.append(f"{name}: {count:,}")
    return "\n".join(lines)
