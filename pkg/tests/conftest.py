"""Shared fixtures: tiny configs and small synthetic cohorts."""

import numpy as np
import pytest

from cinevae.config import ExperimentConfig, preset_config, validate_config
from cinevae.models.phantom import GenerativeFactors, LabeledSubject, SegSequence, uniform_phases

TINY_SHAPE = (3, 3, 8, 8)  # T, S, H, W


def random_subject(rng: np.random.Generator, y, y_k, shape=TINY_SHAPE, seed: int = 0) -> LabeledSubject:
    labels = rng.integers(0, 4, size=shape, dtype=np.uint8)
    return LabeledSubject(
        sequence=SegSequence(labels, uniform_phases(shape[0])),
        y=y,
        y_k=list(y_k),
        factors=GenerativeFactors(0.5, 1.0, 0.2, 10.0, 4.0, 4.0),
        seed=seed,
    )


def random_cohort(n: int, seed: int = 0, shape=TINY_SHAPE, concepts: int = 1) -> list[LabeledSubject]:
    """Balanced random cohort; both y and every y_k take both values."""
    rng = np.random.default_rng(seed)
    return [
        random_subject(rng, i % 2, [(i // 2) % 2] * concepts, shape, seed=1000 + i)
        for i in range(n)
    ]


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    return preset_config("tiny")


@pytest.fixture
def tiny_holdout_config() -> ExperimentConfig:
    raw = preset_config("tiny").model_dump(mode="json")
    raw["evaluation"]["protocol"] = "holdout"
    raw["evaluation"]["test_fraction"] = 0.25
    raw["train"]["validation_fraction"] = 0.25
    raw["train"]["augmentation"]["enabled"] = False
    return validate_config(raw)


@pytest.fixture
def tiny_cohort() -> list[LabeledSubject]:
    return random_cohort(16)


@pytest.fixture
def default_factors() -> GenerativeFactors:
    return GenerativeFactors(
        contraction_amplitude=0.6,
        sf_amplitude=3.0,
        hidden_factor=0.3,
        base_radius=12.0,
        center_x=40.0,
        center_y=40.0,
    )


@pytest.fixture
def experiment_config(tmp_path) -> ExperimentConfig:
    """Tiny model on a 40x40 grid with a small phantom cohort and pool."""
    raw = preset_config("tiny").model_dump(mode="json")
    raw["model"]["height"] = 40
    raw["model"]["width"] = 40
    raw["cohort"]["n_subjects"] = 8
    raw["data"]["pool_size"] = 4
    raw["output_dir"] = str(tmp_path / "experiment")
    return validate_config(raw)
