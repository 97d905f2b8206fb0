"""Tests for experiment configuration: defaults, validation, overrides, hashing."""

import pytest

from cinevae.config import (
    ExperimentConfig,
    config_hash,
    dump_config,
    parse_config,
    preset_config,
    validate_config,
)
from cinevae.errors import EXIT_USAGE, ConfigError, exit_code_for


class TestDefaults:
    """An empty config reproduces the reference hyperparameters."""

    def test_empty_file_yields_defaults(self, tmp_path):
        """Given an empty YAML file, should produce the documented defaults."""
        # Given
        path = tmp_path / "config.yaml"
        path.write_text("")

        # When
        config = parse_config(path, environ={})

        # Then
        assert config.train.weights.beta == 0.2
        assert config.train.weights.gamma == 1.0
        assert config.train.weights.alpha == [0.9]
        assert config.model.latent_dim == 128
        assert config.model.frames == 25
        assert config.model.concepts[0].size == 64
        assert config.model.concepts[0].start == 0
        assert config.train.learning_rate == 1e-4
        assert config.train.batch_size == 8

    def test_no_path_equals_empty_file(self, tmp_path):
        """Given no file at all, should equal the empty-file config."""
        path = tmp_path / "empty.yaml"
        path.write_text("")

        assert parse_config(None, environ={}) == parse_config(path, environ={})

    def test_cohort_finetune_epochs(self):
        """Stage 1 epochs not spent on the pool go to the cohort."""
        config = ExperimentConfig()

        assert config.train.cohort_finetune_epochs == 50 - 40


class TestValidation:
    """Invalid configs fail before compute with the offending key named."""

    def test_unknown_key_rejected(self, tmp_path):
        """Given an unknown key, should name it."""
        # Given
        path = tmp_path / "c.yaml"
        path.write_text("train:\n  learnin_rate: 0.1\n")

        # When/Then
        with pytest.raises(ConfigError, match="train.learnin_rate: unknown key"):
            parse_config(path, environ={})

    def test_type_mismatch_rejected(self, tmp_path):
        """Given a non-numeric epoch count, should name the key."""
        path = tmp_path / "c.yaml"
        path.write_text("train:\n  batch_size: many\n")

        with pytest.raises(ConfigError) as exc:
            parse_config(path, environ={})
        assert exc.value.key == "train.batch_size"

    def test_concepts_covering_latent_space_rejected(self):
        """Given a concept subset spanning all of D, should refuse (no remainder)."""
        raw = {
            "model": {"latent_dim": 8, "concepts": [{"name": "SF", "start": 0, "size": 8}]},
        }

        with pytest.raises(ConfigError, match="no reserved remainder"):
            validate_config(raw)

    def test_concept_outside_latent_space_rejected(self):
        raw = {"model": {"latent_dim": 8, "concepts": [{"start": 6, "size": 4}]}}

        with pytest.raises(ConfigError, match="outside latent_dim"):
            validate_config(raw)

    def test_alpha_length_must_match_concepts(self):
        """Given two concepts and one alpha, should refuse."""
        raw = {
            "model": {
                "latent_dim": 16,
                "concepts": [{"name": "a", "start": 0, "size": 4}, {"name": "b", "start": 4, "size": 4}],
            },
        }

        with pytest.raises(ConfigError, match="alpha"):
            validate_config(raw)

    def test_pool_epochs_within_stage_one(self):
        raw = {"train": {"stage_epochs": [5, 5, 5], "pool_epochs": 6}}

        with pytest.raises(ConfigError, match="pool_epochs"):
            validate_config(raw)

    def test_spatial_size_divisible_by_encoder_stages(self):
        raw = {"model": {"height": 30, "width": 32}}

        with pytest.raises(ConfigError, match="height=30"):
            validate_config(raw)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigError, match="mapping"):
            parse_config(path, environ={})

    def test_config_errors_map_to_usage_exit_code(self):
        assert exit_code_for(ConfigError("bad", "x")) == EXIT_USAGE


class TestOverrides:
    """Environment variables and presets layer under/over the file."""

    def test_environment_overrides_nested_key(self, tmp_path):
        """Given CINEVAE_TRAIN_LEARNING_RATE, should replace the file value."""
        # Given
        path = tmp_path / "c.yaml"
        path.write_text("train:\n  learning_rate: 0.001\n")

        # When
        config = parse_config(path, environ={"CINEVAE_TRAIN_LEARNING_RATE": "3e-4"})

        # Then
        assert config.train.learning_rate == pytest.approx(3e-4)

    def test_environment_list_value(self):
        config = parse_config(
            None,
            environ={"CINEVAE_TRAIN_STAGE_EPOCHS": "[3, 2, 1]", "CINEVAE_TRAIN_POOL_EPOCHS": "2"},
        )

        assert config.train.stage_epochs == (3, 2, 1)
        assert config.train.cohort_finetune_epochs == 1

    def test_environment_value_is_validated(self):
        with pytest.raises(ConfigError, match="model.latent_dim"):
            parse_config(None, environ={"CINEVAE_MODEL_LATENT_DIM": "zero"})

    def test_file_overrides_preset(self, tmp_path):
        """Given the tiny preset and a file changing beta, should keep both."""
        path = tmp_path / "c.yaml"
        path.write_text("train:\n  weights:\n    beta: 0.5\n")

        config = parse_config(path, environ={}, preset="tiny")

        assert config.model.latent_dim == 4
        assert config.train.weights.beta == 0.5

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            preset_config("huge")

    def test_desk_preset(self):
        config = preset_config("desk")

        assert config.model.latent_dim == 32
        assert config.model.concepts[0].size == 16
        assert config.cohort.n_subjects == 200
        assert config.evaluation.protocol == "holdout"


class TestSerialization:
    """Canonical YAML and content hashes."""

    def test_parse_dump_parse_is_idempotent(self, tmp_path):
        # Given
        first = preset_config("desk")
        path = tmp_path / "c.yaml"
        path.write_text(dump_config(first))

        # When
        second = parse_config(path, environ={})

        # Then
        assert second == first
        assert dump_config(second) == dump_config(first)

    def test_hash_changes_with_content(self):
        base = preset_config("tiny")
        changed = validate_config({**base.model_dump(mode="json"), "output_dir": "elsewhere"})

        assert config_hash(base) == config_hash(preset_config("tiny"))
        assert config_hash(base) != config_hash(changed)
