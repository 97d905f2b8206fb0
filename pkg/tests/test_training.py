"""Tests for the training stages, schedule, resume and beta sweep."""

import json

import numpy as np
import pytest
import torch

from cinevae.config import ExperimentConfig, LossWeights, validate_config
from cinevae.errors import ConfigError, RejectedInputError
from cinevae.network import build_model, load_checkpoint
from cinevae.network.losses import combine_loss_terms
from cinevae.pipeline import (
    ScheduleData,
    beta_sweep,
    fit_schedule,
    format_sweep,
    iterate_batches,
    predict,
    run_schedule,
    stage_weights,
    to_arrays,
    train_stage,
    validation_split,
)
from cinevae.pipeline.gradcheck import gradient_check, kl_path_gradients, loss_gradients, random_batch
from cinevae.pipeline.stages import dataset_loss
from cinevae.pipeline.sweep import SweepRow, kl_per_dimension, recommend_beta, scale_epochs

from .conftest import random_cohort


def with_train(config: ExperimentConfig, **updates) -> ExperimentConfig:
    raw = config.model_dump(mode="json")
    raw["train"].update(updates)
    return validate_config(raw)


def snapshot(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {k: v.detach().clone() for k, v in module.state_dict().items()}


def unchanged(before: dict[str, torch.Tensor], module: torch.nn.Module) -> bool:
    return all(torch.equal(before[k], v) for k, v in module.state_dict().items())


class TestStageWeights:
    def test_masks_per_stage(self):
        weights = LossWeights(beta=0.2, gamma=1.0, alpha=[0.9])

        assert stage_weights(1, weights) == LossWeights(beta=0.2, gamma=0.0, alpha=[0.0])
        assert stage_weights(2, weights) == LossWeights(beta=0.2, gamma=1.0, alpha=[0.0])
        assert stage_weights(3, weights) == weights

    def test_invalid_stage(self):
        with pytest.raises(RejectedInputError):
            stage_weights(4, LossWeights())


class TestTrainStage:
    """Each stage only moves the parameters its loss reaches."""

    @pytest.fixture
    def setup(self, tiny_config):
        model = build_model(tiny_config.model, seed=0)
        arrays = to_arrays(random_cohort(8), tiny_config.model)
        return model, arrays, tiny_config.train

    def test_stage_one_leaves_heads_untouched(self, setup):
        # Given
        model, arrays, train = setup
        primary, concepts = snapshot(model.primary), snapshot(model.concept_heads)
        encoder = snapshot(model.encoder)

        # When
        _, history = train_stage(model, arrays, 1, train, epochs=1)

        # Then
        assert len(history) == 1
        assert unchanged(primary, model.primary)
        assert unchanged(concepts, model.concept_heads)
        assert not unchanged(encoder, model.encoder)

    def test_stage_two_leaves_concept_heads_untouched(self, setup):
        model, arrays, train = setup
        primary, concepts = snapshot(model.primary), snapshot(model.concept_heads)

        train_stage(model, arrays, 2, train, epochs=1)

        assert not unchanged(primary, model.primary)
        assert unchanged(concepts, model.concept_heads)

    def test_stage_three_trains_concept_heads(self, setup):
        model, arrays, train = setup
        concepts = snapshot(model.concept_heads)

        _, history = train_stage(model, arrays, 3, train, epochs=1)

        assert not unchanged(concepts, model.concept_heads)
        assert history.records[0].concepts[0] is not None

    def test_labeled_stage_needs_labels(self, setup, tiny_config):
        model, _, train = setup
        subjects = random_cohort(4)
        for s in subjects:
            s.y = None
        arrays = to_arrays(subjects, tiny_config.model)

        with pytest.raises(ConfigError, match="primary labels"):
            train_stage(model, arrays, 2, train, epochs=1)

    def test_history_records_validation_metrics(self, setup):
        model, arrays, train = setup

        _, history = train_stage(model, arrays.subset(range(4)), 1, train, epochs=2, val=arrays.subset(range(4, 8)))

        assert [r.epoch for r in history.records] == [0, 1]
        assert history.records[-1].val_dice is not None
        assert 0.0 <= history.records[-1].val_primary_bacc <= 1.0


class TestBatching:
    def test_same_seed_same_batches(self, tiny_config):
        arrays = to_arrays(random_cohort(8), tiny_config.model)

        first = [b[1] for b in iterate_batches(arrays, tiny_config.train, 1, 0, 0)]
        second = [b[1] for b in iterate_batches(arrays, tiny_config.train, 1, 0, 0)]

        assert len(first) == 4
        assert all(torch.equal(a, b) for a, b in zip(first, second))

    def test_validation_split_is_stratified(self, tiny_config):
        arrays = to_arrays(random_cohort(20), tiny_config.model)

        fit, val = validation_split(arrays, tiny_config.train)

        assert len(val) == 4
        assert sorted(np.concatenate([fit, val]).tolist()) == list(range(20))
        assert set(arrays.y[val].tolist()) == {0, 1}

    def test_frame_count_resampled_to_model(self, tiny_config):
        cohort = random_cohort(2, shape=(5, 3, 8, 8))

        arrays = to_arrays(cohort, tiny_config.model)

        assert arrays.labels.shape == (2, 3, 3, 8, 8)

    def test_slice_mismatch_rejected(self, tiny_config):
        with pytest.raises(RejectedInputError, match="model expects"):
            to_arrays(random_cohort(2, shape=(3, 2, 8, 8)), tiny_config.model)


class TestSchedule:
    """Full schedules, determinism and checkpoint resume."""

    def test_same_seed_same_weights(self, tiny_config):
        arrays = to_arrays(random_cohort(8), tiny_config.model)
        models = []
        for _ in range(2):
            model = build_model(tiny_config.model, tiny_config.train.seed)
            fit_schedule(model, tiny_config.train, ScheduleData(fit=arrays))
            models.append(model)

        assert unchanged(snapshot(models[0]), models[1])

    def test_pool_epochs_need_pool(self, tiny_config):
        config = with_train(tiny_config, stage_epochs=[2, 1, 1], pool_epochs=1)
        arrays = to_arrays(random_cohort(4), config.model)

        with pytest.raises(ConfigError, match="pretraining pool"):
            fit_schedule(build_model(config.model, 0), config.train, ScheduleData(fit=arrays), stages=[1])

    def test_pool_state_recorded(self, tiny_config):
        config = with_train(tiny_config, stage_epochs=[2, 1, 1], pool_epochs=1)
        arrays = to_arrays(random_cohort(4), config.model)
        pool = to_arrays(random_cohort(4, seed=5), config.model)

        result = fit_schedule(
            build_model(config.model, 0), config.train, ScheduleData(fit=arrays, pool=pool), stages=[1]
        )

        assert result.stages[0].pool_state is not None
        phases = [r.phase for r in result.stages[0].history.records]
        assert phases == ["pool", "cohort"]

    def test_run_schedule_writes_checkpoints_and_histories(self, tmp_path, tiny_config):
        # Given
        cohort = random_cohort(8)

        # When
        last = run_schedule(tiny_config, tmp_path, cohort=cohort)

        # Then
        assert last == tmp_path / "ckpt" / "stage3.pt"
        for stage in (1, 2, 3):
            assert (tmp_path / "ckpt" / f"stage{stage}.pt").exists()
            lines = (tmp_path / "reports" / f"history_stage{stage}.jsonl").read_text().splitlines()
            assert json.loads(lines[0])["stage"] == stage
        assert load_checkpoint(last).rng_state == {"seed": 0, "stage": 3, "epoch": 1}

    def test_resume_matches_uninterrupted_run(self, tmp_path, tiny_config):
        """Given stage 3 resumed from a stage-2 checkpoint, weights equal an uninterrupted run."""
        # Given
        cohort = random_cohort(8)
        whole = run_schedule(tiny_config, tmp_path / "a", cohort=cohort)

        # When
        stage2 = run_schedule(tiny_config, tmp_path / "b", cohort=cohort, stages=[1, 2])
        resumed = run_schedule(tiny_config, tmp_path / "b", cohort=cohort, stages=[3], resume=stage2)

        # Then
        expected = load_checkpoint(whole).model
        assert unchanged(snapshot(expected), load_checkpoint(resumed).model)

    def test_stage_without_resume_rejected(self, tmp_path, tiny_config):
        with pytest.raises(ConfigError, match="needs the stage 1 checkpoint"):
            run_schedule(tiny_config, tmp_path, cohort=random_cohort(4), stages=[2])

    def test_resume_with_other_model_rejected(self, tmp_path, tiny_config):
        stage1 = run_schedule(tiny_config, tmp_path, cohort=random_cohort(4), stages=[1])
        raw = tiny_config.model_dump(mode="json")
        raw["model"]["embed_dim"] = 2
        other = validate_config(raw)

        with pytest.raises(ConfigError, match="different model config"):
            run_schedule(other, tmp_path, cohort=random_cohort(4), stages=[2], resume=stage1)

    def test_missing_cohort_rejected(self, tmp_path, tiny_config):
        with pytest.raises(ConfigError, match="cohort"):
            run_schedule(tiny_config, tmp_path)


class TestBetaSweep:
    def test_scale_epochs(self):
        assert scale_epochs(50, 0.2) == 10
        assert scale_epochs(1, 0.2) == 1
        assert scale_epochs(0, 0.2) == 0

    def test_recommend_largest_beta_within_tolerance(self):
        rows = [
            SweepRow(beta=0.0, dice=0.95, kl_per_dim=2.0),
            SweepRow(beta=0.2, dice=0.94, kl_per_dim=1.0),
            SweepRow(beta=1.0, dice=0.80, kl_per_dim=0.1),
        ]

        assert recommend_beta(rows) == 0.2

    def test_kl_per_dimension_zero_at_prior(self):
        assert kl_per_dimension(np.zeros((2, 3, 4)), np.zeros((2, 3, 4))) == 0.0

    def test_sweep_runs_each_beta(self, tiny_config):
        # Given
        cohort = random_cohort(8)

        # When
        report = beta_sweep(tiny_config, [0.0, 0.5], cohort)

        # Then
        assert [r.beta for r in report.rows] == [0.0, 0.5]
        assert report.recommended_beta in (0.0, 0.5)
        assert report.epochs == (1, 1, 1)
        assert "Recommended beta" in format_sweep(report)

    def test_empty_grid_rejected(self, tiny_config):
        with pytest.raises(RejectedInputError):
            beta_sweep(tiny_config, [], random_cohort(4))


def test_predict_shapes(tiny_config):
    model = build_model(tiny_config.model, 0)
    arrays = to_arrays(random_cohort(5), tiny_config.model)

    preds = predict(model, arrays, batch_size=2)

    assert preds.mu.shape == (5, 3, 4)
    assert preds.y_k_hat.shape == (5, 1)
    assert preds.dice.shape == (5,)


class TestStageLoss:
    """A stage never leaves the training-set loss above where it started."""

    def test_each_stage_lowers_training_loss(self, tiny_config):
        """Given 10 seeds, every stage lowers the fixed-noise training loss in at least 9."""
        passing = 0
        for seed in range(10):
            # Given
            config = with_train(
                tiny_config, seed=seed, learning_rate=1e-3, augmentation={"enabled": False}
            )
            model = build_model(config.model, seed)
            arrays = to_arrays(random_cohort(8, seed=seed), config.model)

            # When
            lowered = []
            for stage in (1, 2, 3):
                weights = stage_weights(stage, config.train.weights)
                before = dataset_loss(model, arrays, weights, seed)
                train_stage(model, arrays, stage, config.train, epochs=3)
                lowered.append(dataset_loss(model, arrays, weights, seed) <= before)

            passing += all(lowered)

        # Then
        assert passing >= 9


class TestGradients:
    """Analytic gradients of the joint loss and its weighted terms."""

    @pytest.fixture
    def setup(self, tiny_config):
        model = build_model(tiny_config.model, 0, dtype=torch.float64)
        model.eval()
        return model, random_batch(tiny_config, seed=0)

    def test_doubling_beta_doubles_kl_gradients(self, setup):
        # Given
        model, batch = setup

        # When
        single = kl_path_gradients(model, batch, 0.1)
        double = kl_path_gradients(model, batch, 0.2)

        # Then
        encoder = [name for name, g in single.items() if name.startswith("encoder.") and g is not None]
        assert encoder
        for name in encoder:
            assert torch.equal(double[name], 2.0 * single[name]), name

    def test_zero_beta_has_no_kl_gradient(self, setup):
        model, batch = setup

        grads = kl_path_gradients(model, batch, 0.0)

        assert all(g is None for g in grads.values())

    def test_zero_weight_heads_get_exact_zero(self, setup):
        """Given gamma = alpha = 0, no gradient reaches either classifier head."""
        # Given
        model, batch = setup
        weights = LossWeights(beta=0.2, gamma=0.0, alpha=[0.0])

        # When
        grads = loss_gradients(model, batch, weights)

        # Then
        heads = [name for name in grads if name.startswith(("primary.", "concept_heads."))]
        assert heads
        for name in heads:
            assert grads[name] is None or not torch.any(grads[name]), name

    def test_zero_weight_terms_drop_out_of_the_sum(self):
        recon = torch.tensor([[0.5, 0.25]], dtype=torch.float64)
        kl = torch.tensor([[1.0, 3.0]], dtype=torch.float64)
        weights = LossWeights(beta=0.0, gamma=0.0, alpha=[0.0])

        total = combine_loss_terms(recon, kl, torch.tensor(7.0), [torch.tensor(9.0)], weights)

        assert total.item() == 0.375

    def test_tiny_model_matches_finite_differences(self, tiny_config):
        result = gradient_check(tiny_config, seed=0)

        assert result.checked > 0
        assert result.passed(1e-4), (
            f"{result.worst_parameter}[{result.worst_index}]: {result.max_relative_error:.2e}"
        )
