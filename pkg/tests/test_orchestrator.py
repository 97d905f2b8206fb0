"""Tests for experiment orchestration: phase graph, manifest, lock and runner."""

from pathlib import Path

import pytest

from cinevae.errors import DependencyError, LockError
from cinevae.models.experiment import ArtifactKind, ExperimentManifest, Phase
from cinevae.orchestrator import (
    CANONICAL_ORDER,
    PhaseGraph,
    experiment_lock,
    load_manifest,
    parse_phases,
    run_pipeline,
    save_manifest,
    verify_artifacts,
)
from cinevae.orchestrator.manifest import complete_phase, register_artifact
from cinevae.orchestrator.orchestrator import CONFIG_SNAPSHOT

DATASET_ARTIFACTS = {
    "data/cohort.segs",
    "data/cohort.meta.json",
    "data/pool.segs",
    "data/pool.meta.json",
}


class TestPhaseGraph:
    """Dependency ordering between pipeline phases."""

    def test_all_phases_in_canonical_order(self):
        """Given every phase, should return them prerequisites first."""
        # Given
        graph = PhaseGraph()

        # When
        order = graph.topological_order(set(Phase))

        # Then
        assert order == CANONICAL_ORDER

    def test_independent_phases_keep_canonical_order(self):
        graph = PhaseGraph()

        assert graph.topological_order({Phase.INTERPRET, Phase.EVAL}) == [Phase.EVAL, Phase.INTERPRET]

    def test_dependencies_and_downstream(self):
        graph = PhaseGraph()

        assert graph.get_dependencies(Phase.EVAL) == {Phase.TRAIN}
        assert graph.get_dependents(Phase.TRAIN) == {Phase.EVAL, Phase.INTERPRET}
        assert graph.downstream(Phase.GENERATE) == set(CANONICAL_ORDER) - {Phase.GENERATE}

    def test_circular_dependency_raises(self):
        """Given a cycle, should raise ValueError."""
        graph = PhaseGraph({Phase.GENERATE: {Phase.TRAIN}, Phase.TRAIN: {Phase.GENERATE}})

        with pytest.raises(ValueError, match="Circular dependency"):
            graph.topological_order({Phase.GENERATE, Phase.TRAIN})

    def test_parse_phases(self):
        assert parse_phases(["all"]) == set(Phase)
        assert parse_phases(["generate", " Train ", ""]) == {Phase.GENERATE, Phase.TRAIN}
        with pytest.raises(ValueError):
            parse_phases(["deploy"])


class TestManifest:
    """Artifact registration and verification."""

    def test_save_and_load(self, tmp_path):
        # Given
        (tmp_path / "report.json").write_text("{}")
        manifest = ExperimentManifest(config_hash="h1", seeds={"train": 0})
        register_artifact(manifest, tmp_path, "report.json", ArtifactKind.REPORT, Phase.EVAL, "cinevae eval")
        complete_phase(manifest, Phase.EVAL, "h1", ["report.json"])

        # When
        save_manifest(manifest, tmp_path)
        loaded = load_manifest(tmp_path, "other")

        # Then
        assert loaded == manifest
        assert loaded.artifacts["report.json"].command == "cinevae eval"

    def test_missing_manifest_is_empty(self, tmp_path):
        manifest = load_manifest(tmp_path, "h2")

        assert manifest.config_hash == "h2"
        assert manifest.artifacts == {}

    def test_verify_detects_modified_and_missing(self, tmp_path):
        # Given
        for name in ("a.txt", "b.txt"):
            (tmp_path / name).write_text(name)
        manifest = ExperimentManifest(config_hash="h")
        for name in ("a.txt", "b.txt"):
            register_artifact(manifest, tmp_path, name, ArtifactKind.TABLE, Phase.EVAL, "")

        # When
        (tmp_path / "a.txt").write_text("changed")
        (tmp_path / "b.txt").unlink()

        # Then
        assert sorted(verify_artifacts(manifest, tmp_path)) == ["missing: b.txt", "modified: a.txt"]


class TestLock:
    def test_second_holder_rejected(self, tmp_path):
        with experiment_lock(tmp_path) as lock:
            assert lock.exists()
            with pytest.raises(LockError, match="locked"):
                with experiment_lock(tmp_path):
                    pass
        assert not lock.exists()


class TestRunPipeline:
    """Running phases inside an experiment directory."""

    def test_generate_registers_exactly_the_datasets(self, experiment_config):
        """Given a fresh directory, generate should register the two datasets and sidecars."""
        # Given
        out = Path(experiment_config.output_dir)

        # When
        manifest = run_pipeline(experiment_config, phases={Phase.GENERATE}, command="cinevae run")

        # Then
        assert set(manifest.artifacts) == DATASET_ARTIFACTS
        assert all(a.kind == "dataset" for a in manifest.artifacts.values())
        assert verify_artifacts(manifest, out) == []
        assert (out / CONFIG_SNAPSHOT).exists()
        assert manifest.seeds["cohort"] == experiment_config.cohort.seed
        for name in ("data", "ckpt", "reports", "figures", "logs"):
            assert (out / name).is_dir()
        assert not (out / ".lock").exists()

    def test_rerun_is_a_no_op(self, experiment_config):
        """Given a completed phase and the same config, nothing is produced again."""
        # Given
        first = run_pipeline(experiment_config, phases={Phase.GENERATE})
        stamps = {k: a.created_at for k, a in first.artifacts.items()}
        out = Path(experiment_config.output_dir)
        mtime = (out / "data" / "cohort.segs").stat().st_mtime_ns

        # When
        second = run_pipeline(experiment_config, phases={Phase.GENERATE})

        # Then
        assert {k: a.created_at for k, a in second.artifacts.items()} == stamps
        assert (out / "data" / "cohort.segs").stat().st_mtime_ns == mtime

    def test_modified_artifact_triggers_rerun(self, experiment_config):
        run_pipeline(experiment_config, phases={Phase.GENERATE})
        out = Path(experiment_config.output_dir)
        (out / "data" / "pool.meta.json").write_text("{}")

        manifest = run_pipeline(experiment_config, phases={Phase.GENERATE})

        assert verify_artifacts(manifest, out) == []

    def test_missing_prerequisite_named(self, experiment_config):
        """Given no pretrain run, asking for train should name the pretrain phase."""
        with pytest.raises(DependencyError) as exc:
            run_pipeline(experiment_config, phases={Phase.TRAIN})

        assert exc.value.phase == "pretrain"

    def test_prerequisite_from_other_config_rejected(self, experiment_config):
        run_pipeline(experiment_config, phases={Phase.GENERATE})
        changed = experiment_config.model_copy(update={"cohort": experiment_config.cohort.model_copy(update={"seed": 5})})

        with pytest.raises(DependencyError, match="different config"):
            run_pipeline(changed, phases={Phase.PRETRAIN})

    def test_generate_then_pretrain(self, experiment_config):
        # Given
        run_pipeline(experiment_config, phases={Phase.GENERATE})

        # When
        manifest = run_pipeline(experiment_config, phases={Phase.PRETRAIN})

        # Then
        assert "ckpt/stage1.pt" in manifest.artifacts
        assert manifest.phase_record(Phase.PRETRAIN) is not None
        assert set(manifest.artifacts) >= DATASET_ARTIFACTS

    def test_forced_rerun_invalidates_downstream(self, experiment_config):
        """Given generate and pretrain done, forcing generate alone should forget pretrain."""
        # Given
        run_pipeline(experiment_config, phases={Phase.GENERATE, Phase.PRETRAIN})

        # When
        manifest = run_pipeline(experiment_config, phases={Phase.GENERATE}, force=True)

        # Then
        assert manifest.phase_record(Phase.PRETRAIN) is None
        assert "ckpt/stage1.pt" not in manifest.artifacts
        assert set(manifest.artifacts) == DATASET_ARTIFACTS
        with pytest.raises(DependencyError) as exc:
            run_pipeline(experiment_config, phases={Phase.TRAIN})
        assert exc.value.phase == "pretrain"

    def test_rerun_with_downstream_scheduled_keeps_records(self, experiment_config):
        run_pipeline(experiment_config, phases={Phase.GENERATE})

        manifest = run_pipeline(experiment_config, phases={Phase.GENERATE, Phase.PRETRAIN}, force=True)

        assert manifest.phase_record(Phase.GENERATE) is not None
        assert manifest.phase_record(Phase.PRETRAIN) is not None

    def test_held_lock_rejected(self, experiment_config):
        out = Path(experiment_config.output_dir)
        out.mkdir(parents=True)
        (out / ".lock").write_text("123")

        with pytest.raises(LockError):
            run_pipeline(experiment_config, phases={Phase.GENERATE})
