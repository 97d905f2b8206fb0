"""Experiment runner: executes pipeline phases inside one experiment directory."""

import os
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from ..config import ExperimentConfig, config_hash, dump_config
from ..errors import DependencyError, LockError
from ..models.experiment import ExperimentManifest, Phase
from ..utils.logging import get_logger
from .manifest import (
    complete_phase,
    drop_phase,
    load_manifest,
    phase_is_current,
    register_artifact,
    save_manifest,
)
from .phases import CANONICAL_ORDER, PhaseGraph
from .steps import EXPERIMENT_DIRS, PHASE_STEPS, PhaseContext

LOCK_NAME = ".lock"
CONFIG_SNAPSHOT = "config.resolved.yaml"


@contextmanager
def experiment_lock(out_dir: Path) -> Iterator[Path]:
    """
    Advisory lock on an experiment directory.

    Raises:
        LockError: If another orchestrator already holds the directory
    """
    path = Path(out_dir) / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise LockError(
            f"experiment directory {out_dir} is locked by another run "
            f"(remove {path} if no run is active)"
        ) from e
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


def experiment_seeds(config: ExperimentConfig) -> dict[str, int]:
    return {
        "cohort": config.cohort.seed,
        "pool": config.data.pool_seed,
        "train": config.train.seed,
        "evaluation": config.evaluation.seed,
    }


class ExperimentRunner:
    """
    Runs requested phases in dependency order and keeps the manifest current.

    A phase is a no-op when it completed under the same config hash, its
    artifacts still verify, no prerequisite was re-executed in this run and
    force is off.
    """

    def __init__(self, config: ExperimentConfig, out_dir: Path, command: str = ""):
        self.config = config
        self.out_dir = Path(out_dir)
        self.command = command
        self.config_hash = config_hash(config)
        self.graph = PhaseGraph()
        self.logger = get_logger("cinevae.orchestrator")

    def prepare(self) -> None:
        for name in EXPERIMENT_DIRS:
            (self.out_dir / name).mkdir(parents=True, exist_ok=True)

    def plan(self, phases: Iterable[Phase]) -> list[Phase]:
        return self.graph.topological_order(phases)

    def check_prerequisites(
        self, manifest: ExperimentManifest, phase: Phase, scheduled: set[Phase]
    ) -> None:
        """
        Raises:
            DependencyError: naming the first prerequisite that is neither
                scheduled nor completed with intact artifacts
        """
        for dep in sorted(self.graph.get_dependencies(phase), key=lambda p: p.value):
            if dep in scheduled:
                continue
            record = manifest.phase_record(dep)
            if record is None:
                raise DependencyError(
                    dep.value, f"phase '{phase.value}' needs phase '{dep.value}', which has not run"
                )
            if not phase_is_current(manifest, self.out_dir, dep, record.config_hash):
                raise DependencyError(
                    dep.value,
                    f"phase '{phase.value}' needs phase '{dep.value}', whose artifacts are "
                    f"missing or modified",
                )
            if record.config_hash != self.config_hash:
                raise DependencyError(
                    dep.value,
                    f"phase '{phase.value}' needs phase '{dep.value}', which ran under a "
                    f"different config; rerun it",
                )

    def invalidate_downstream(
        self, manifest: ExperimentManifest, phase: Phase, scheduled: set[Phase]
    ) -> None:
        """Forget completed phases outside this run that read what phase just rewrote."""
        for later in sorted(self.graph.downstream(phase) - scheduled, key=CANONICAL_ORDER.index):
            if manifest.phase_record(later) is not None:
                drop_phase(manifest, later)
                self.logger.info(f"Phase {later.value}: invalidated by {phase.value}, rerun it")

    def run(self, phases: Iterable[Phase], force: bool = False) -> ExperimentManifest:
        order = self.plan(phases)
        self.prepare()
        with experiment_lock(self.out_dir):
            manifest = load_manifest(self.out_dir, self.config_hash)
            scheduled = set(order)
            for phase in order:
                self.check_prerequisites(manifest, phase, scheduled)

            (self.out_dir / CONFIG_SNAPSHOT).write_text(dump_config(self.config))
            manifest.config_hash = self.config_hash
            manifest.seeds = experiment_seeds(self.config)

            executed: set[Phase] = set()
            context = PhaseContext(self.config, self.out_dir)
            for phase in order:
                upstream_changed = bool(self.graph.get_dependencies(phase) & executed)
                if (
                    not force
                    and not upstream_changed
                    and phase_is_current(manifest, self.out_dir, phase, self.config_hash)
                ):
                    self.logger.info(f"Phase {phase.value}: up to date, skipping")
                    continue

                self.logger.info(f"Phase {phase.value}: running")
                drop_phase(manifest, phase)
                produced = PHASE_STEPS[phase](context)
                paths = []
                for relative, kind in produced:
                    register_artifact(manifest, self.out_dir, relative, kind, phase, self.command)
                    paths.append(relative)
                    self.logger.debug(f"Registered {kind.value} {relative}")
                complete_phase(manifest, phase, self.config_hash, paths)
                self.invalidate_downstream(manifest, phase, scheduled)
                save_manifest(manifest, self.out_dir)
                executed.add(phase)
                self.logger.info(f"Phase {phase.value}: {len(paths)} artifacts registered")

            save_manifest(manifest, self.out_dir)
        return manifest


def run_pipeline(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    phases: Iterable[Phase] = (),
    force: bool = False,
    command: str = "",
) -> ExperimentManifest:
    """
    Execute pipeline phases in canonical order, registering every artifact.

    Args:
        config: Validated experiment config
        out_dir: Experiment directory (default: config.output_dir)
        phases: Phases to run
        force: Re-run phases even when up to date
        command: Producing command line recorded for each artifact

    Returns:
        Updated manifest

    Raises:
        DependencyError: A prerequisite phase neither scheduled nor completed
        LockError: The directory is held by another run
    """
    runner = ExperimentRunner(config, Path(out_dir or config.output_dir), command)
    return runner.run(phases, force=force)
