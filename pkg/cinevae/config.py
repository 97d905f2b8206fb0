"""Configuration for cinevae experiments.

All sub-configs are strict pydantic models: unknown keys are rejected and
every invariant is checked before any compute starts. Files are YAML; every
leaf key can be overridden from the environment with the ``CINEVAE_`` prefix
and the upper-cased key path (``CINEVAE_TRAIN_LEARNING_RATE``).
"""

import copy
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .utils.hashing import canonical_json, sha256_hex

ENV_PREFIX = "CINEVAE_"
SCHEMA_VERSION = 1
CLASS_COUNT = 4  # background, LV blood pool, LV myocardium, RV blood pool


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ConceptSpec(_Strict):
    """Contiguous latent subset [start, start + size) read by one concept head."""

    name: str = "SF"
    start: int = Field(default=0, ge=0)
    size: int = Field(default=64, ge=1)

    @property
    def stop(self) -> int:
        return self.start + self.size


class LossWeights(_Strict):
    """Weights of the joint objective: beta (KL), gamma (primary), alpha (per concept)."""

    beta: float = Field(default=0.2, ge=0.0)
    gamma: float = Field(default=1.0, ge=0.0)
    alpha: list[float] = Field(default_factory=lambda: [0.9])

    @field_validator("alpha")
    @classmethod
    def _alpha_nonnegative(cls, value: list[float]) -> list[float]:
        if any(a < 0 for a in value):
            raise ValueError("concept weights must be >= 0")
        return value


class ModelConfig(_Strict):
    """Network shape: input geometry, latent size, encoder schedule, heads."""

    slices: int = Field(default=3, ge=1)
    frames: int = Field(default=25, ge=2)
    height: int = Field(default=80, ge=2)
    width: int = Field(default=80, ge=2)
    latent_dim: int = Field(default=128, ge=1)
    class_count: Literal[4] = CLASS_COUNT
    encoder_channels: list[int] = Field(default_factory=lambda: [32, 64, 128, 256])
    embed_dim: int = Field(default=32, ge=1)
    classifier_hidden: list[int] = Field(default_factory=lambda: [256, 64])
    concepts: list[ConceptSpec] = Field(default_factory=lambda: [ConceptSpec()])

    @field_validator("encoder_channels", "classifier_hidden")
    @classmethod
    def _positive_widths(cls, value: list[int]) -> list[int]:
        if not value or any(v < 1 for v in value):
            raise ValueError("widths must be a nonempty list of positive integers")
        return value

    @model_validator(mode="after")
    def _check_geometry(self) -> "ModelConfig":
        factor = 2 ** len(self.encoder_channels)
        for name, size in (("height", self.height), ("width", self.width)):
            if size % factor != 0:
                raise ValueError(
                    f"{name}={size} is not divisible by 2**{len(self.encoder_channels)} "
                    "(one halving per encoder stage)"
                )
        covered: set[int] = set()
        for concept in self.concepts:
            if concept.stop > self.latent_dim:
                raise ValueError(
                    f"concept '{concept.name}' spans [{concept.start}, {concept.stop}) "
                    f"outside latent_dim={self.latent_dim}"
                )
            covered.update(range(concept.start, concept.stop))
        if len(covered) >= self.latent_dim:
            raise ValueError("no reserved remainder: concept subsets cover the whole latent space")
        return self

    @property
    def input_channels(self) -> int:
        return self.slices * self.class_count

    @property
    def bottleneck_size(self) -> tuple[int, int]:
        factor = 2 ** len(self.encoder_channels)
        return self.height // factor, self.width // factor

    def remainder_indices(self) -> list[int]:
        """Latent indices read by no concept head."""
        covered = {i for c in self.concepts for i in range(c.start, c.stop)}
        return [i for i in range(self.latent_dim) if i not in covered]


class AugmentationConfig(_Strict):
    enabled: bool = True
    max_rotation: float = Field(default=15.0, ge=0.0)
    max_translation: float = Field(default=5.0, ge=0.0)


class TrainConfig(_Strict):
    """Three-stage optimisation settings."""

    stage_epochs: tuple[int, int, int] = (50, 50, 30)
    pool_epochs: int = Field(default=40, ge=0)  # part of stage 1 spent on the pool
    learning_rate: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=8, ge=1)
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    weights: LossWeights = Field(default_factory=LossWeights)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    seed: int = Field(default=0, ge=0)
    pool_path: Optional[str] = None
    cohort_path: Optional[str] = None
    validation_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)

    @field_validator("stage_epochs")
    @classmethod
    def _epochs_nonnegative(cls, value: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(e < 0 for e in value):
            raise ValueError("epochs must be >= 0")
        return value

    @model_validator(mode="after")
    def _pool_within_stage1(self) -> "TrainConfig":
        if self.pool_epochs > self.stage_epochs[0]:
            raise ValueError(
                f"pool_epochs={self.pool_epochs} exceeds stage 1 epochs={self.stage_epochs[0]}"
            )
        return self

    @property
    def cohort_finetune_epochs(self) -> int:
        return self.stage_epochs[0] - self.pool_epochs


class CohortSpec(_Strict):
    """Phantom cohort mixture. Defaults reproduce 47/73 responders, 27/47 and 10/26 SF."""

    n_subjects: int = Field(default=73, ge=2)
    p_responder: float = Field(default=47 / 73, gt=0.0, lt=1.0)
    p_sf_given_responder: float = Field(default=27 / 47, ge=0.0, le=1.0)
    p_sf_given_nonresponder: float = Field(default=10 / 26, ge=0.0, le=1.0)
    noise_scale: float = Field(default=0.1, ge=0.0)
    seed: int = Field(default=0, ge=0)


class DataConfig(_Strict):
    pool_size: int = Field(default=500, ge=1)
    pool_seed: int = Field(default=1, ge=0)


class EvalConfig(_Strict):
    protocol: Literal["kfold", "holdout"] = "kfold"
    folds: int = Field(default=5, ge=2)
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)
    beta_grid: list[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.5, 1.0])
    sweep_epoch_scale: float = Field(default=0.2, gt=0.0, le=1.0)
    traverse_steps: int = Field(default=9, ge=1)
    traverse_span: float = Field(default=1.5, ge=0.0)
    mmode_slice: int = Field(default=1, ge=0)
    mmode_line: Optional[tuple[int, int, int, int]] = None


class ExperimentConfig(_Strict):
    """Complete, validated experiment description."""

    schema_version: Literal[1] = SCHEMA_VERSION
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    cohort: CohortSpec = Field(default_factory=CohortSpec)
    data: DataConfig = Field(default_factory=DataConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    output_dir: str = "experiment"

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if len(self.train.weights.alpha) != len(self.model.concepts):
            raise ValueError(
                f"train.weights.alpha has {len(self.train.weights.alpha)} entries "
                f"but model.concepts has {len(self.model.concepts)}"
            )
        if self.evaluation.mmode_slice >= self.model.slices:
            raise ValueError("evaluation.mmode_slice must index an existing slice")
        return self

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "ExperimentConfig":
        """Create config from defaults plus environment variables."""
        return validate_config(apply_env_overrides({}, environ))


PRESETS: dict[str, dict[str, Any]] = {
    "default": {},
    "full": {
        "train": {"stage_epochs": [800, 500, 300], "pool_epochs": 500},
        "data": {"pool_size": 10000},
    },
    "desk": {
        "model": {"latent_dim": 32, "concepts": [{"name": "SF", "start": 0, "size": 16}]},
        "cohort": {"n_subjects": 200},
        "data": {"pool_size": 500},
        "evaluation": {"protocol": "holdout"},
    },
    "tiny": {
        "model": {
            "slices": 3,
            "frames": 3,
            "height": 8,
            "width": 8,
            "latent_dim": 4,
            "encoder_channels": [4, 8],
            "embed_dim": 4,
            "classifier_hidden": [8, 4],
            "concepts": [{"name": "SF", "start": 0, "size": 2}],
        },
        "train": {"stage_epochs": [1, 1, 1], "pool_epochs": 0, "batch_size": 2},
    },
}


def _env_paths(model_cls: type[BaseModel], prefix: tuple[str, ...] = ()) -> dict[str, tuple[str, ...]]:
    paths: dict[str, tuple[str, ...]] = {}
    for name, field in model_cls.model_fields.items():
        path = prefix + (name,)
        annotation = field.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            paths.update(_env_paths(annotation, path))
        else:
            paths[ENV_PREFIX + "_".join(path).upper()] = path
    return paths


def _set_path(raw: dict[str, Any], path: tuple[str, ...], value: Any) -> None:
    node = raw
    for key in path[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[path[-1]] = value


def _merge(base: dict[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_env_overrides(
    raw: dict[str, Any], environ: Optional[Mapping[str, str]] = None
) -> dict[str, Any]:
    """Overlay ``CINEVAE_*`` variables onto a raw config mapping."""
    environ = os.environ if environ is None else environ
    result = copy.deepcopy(raw)
    for env_name, path in _env_paths(ExperimentConfig).items():
        if env_name in environ:
            try:
                value = yaml.safe_load(environ[env_name])
            except yaml.YAMLError as e:
                raise ConfigError(f"cannot parse value of {env_name}: {e}", ".".join(path)) from e
            _set_path(result, path, value)
    return result


def validate_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping, converting pydantic errors into ConfigError."""
    try:
        return ExperimentConfig.model_validate(dict(raw))
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "<root>"
        reason = first["msg"]
        if first["type"] == "extra_forbidden":
            reason = "unknown key"
        raise ConfigError(reason, key) from e


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (choose from {sorted(PRESETS)})", "preset")
    return validate_config(PRESETS[name])


def parse_config(
    path: Optional[Path],
    environ: Optional[Mapping[str, str]] = None,
    preset: Optional[str] = None,
) -> ExperimentConfig:
    """
    Load, override and validate an experiment config.

    Args:
        path: YAML file (None or an empty file yields pure defaults)
        environ: Environment mapping (defaults to os.environ)
        preset: Optional named preset applied underneath the file contents

    Returns:
        Fully validated ExperimentConfig

    Raises:
        ConfigError: naming the offending key and the reason
    """
    if preset and preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}'", "preset")
    raw: dict[str, Any] = copy.deepcopy(PRESETS[preset]) if preset else {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}", str(path)) from e
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML: {e}", str(path)) from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("top level must be a mapping", str(path))
        raw = _merge(raw, loaded)
    return validate_config(apply_env_overrides(raw, environ))


def dump_config(config: ExperimentConfig) -> str:
    """Canonical YAML text of a config."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=True)


def config_hash(config: BaseModel) -> str:
    """SHA-256 of the canonical JSON form of any config model."""
    return sha256_hex(canonical_json(config.model_dump(mode="json")))
