"""Three-stage training schedule with per-stage checkpoints and JSONL histories."""

import copy
import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import torch

from ..config import ExperimentConfig, TrainConfig, config_hash
from ..errors import ConfigError
from ..models.history import EpochRecord, TrainHistory
from ..models.phantom import LabeledSubject
from ..network.checkpoint import build_model, load_checkpoint, save_checkpoint
from ..network.vae import ConceptVAE
from ..phantom.dataset_io import load_dataset
from ..utils.logging import get_logger
from .data import SubjectArrays, holdout_split, to_arrays, validation_split
from .stages import StagePhase, train_stage

logger = get_logger("cinevae.pipeline")

STAGES = (1, 2, 3)


@dataclass
class ScheduleData:
    """Subjects a schedule trains on; val is never augmented and never fitted."""
    fit: SubjectArrays
    val: Optional[SubjectArrays] = None
    pool: Optional[SubjectArrays] = None


@dataclass
class StageResult:
    stage: int
    epochs: int
    history: TrainHistory
    pool_state: Optional[dict[str, torch.Tensor]] = None


@dataclass
class ScheduleResult:
    model: ConceptVAE
    stages: list[StageResult] = field(default_factory=list)
    checkpoints: dict[int, Path] = field(default_factory=dict)


def fit_schedule(
    model: ConceptVAE,
    config: TrainConfig,
    data: ScheduleData,
    stages: Sequence[int] = STAGES,
    on_stage_end: Optional[Callable[[StageResult, ConceptVAE], None]] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
    pool_state: Optional[dict[str, torch.Tensor]] = None,
) -> ScheduleResult:
    """
    Run the requested stages in order on an in-memory model.

    Stage 1 runs pool_epochs over the pretraining pool, then the remaining
    stage-1 epochs over the (unlabeled use of the) training cohort. A given
    pool_state replaces the pool epochs: the model starts stage 1 from it.
    """
    result = ScheduleResult(model=model)
    for stage in sorted(stages):
        history = TrainHistory()
        snapshot = None
        epochs = config.stage_epochs[stage - 1]
        if stage == 1:
            if pool_state is not None:
                model.load_state_dict(pool_state)
                snapshot = pool_state
            elif config.pool_epochs > 0:
                if data.pool is None:
                    raise ConfigError(
                        f"pool_epochs={config.pool_epochs} needs a pretraining pool", "train.pool_path"
                    )
                _, part = train_stage(
                    model, data.pool, 1, config, config.pool_epochs, StagePhase.POOL, on_epoch=on_epoch
                )
                history.extend(part)
                snapshot = copy.deepcopy(model.state_dict())
            _, part = train_stage(
                model,
                data.fit,
                1,
                config,
                config.cohort_finetune_epochs,
                StagePhase.COHORT,
                val=data.val,
                on_epoch=on_epoch,
            )
            history.extend(part)
        else:
            _, part = train_stage(
                model, data.fit, stage, config, epochs, StagePhase.LABELED, val=data.val, on_epoch=on_epoch
            )
            history.extend(part)
        stage_result = StageResult(stage=stage, epochs=epochs, history=history, pool_state=snapshot)
        result.stages.append(stage_result)
        if on_stage_end is not None:
            on_stage_end(stage_result, model)
    return result


def load_subjects(path: Optional[str], what: str, key: str) -> Optional[list[LabeledSubject]]:
    if path is None:
        return None
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"{what} dataset not found: {file}", key)
    return load_dataset(file)


def training_subjects(
    config: ExperimentConfig, cohort: Sequence[LabeledSubject]
) -> tuple[SubjectArrays, Optional[SubjectArrays]]:
    """(fit, validation) arrays: the holdout protocol keeps its test split out of training."""
    arrays = to_arrays(cohort, config.model)
    if config.evaluation.protocol == "holdout":
        train_idx, _ = holdout_split(arrays, config.evaluation)
        arrays = arrays.subset(train_idx)
    fit_idx, val_idx = validation_split(arrays, config.train)
    val = arrays.subset(val_idx) if len(val_idx) else None
    return arrays.subset(fit_idx), val


def _history_writer(path: Path) -> Callable[[EpochRecord], None]:
    def write(record: EpochRecord) -> None:
        with path.open("a") as f:
            f.write(json.dumps(record.to_json()) + "\n")

    return write


def run_schedule(
    config: ExperimentConfig,
    out_dir: Path,
    cohort: Optional[Sequence[LabeledSubject]] = None,
    pool: Optional[Sequence[LabeledSubject]] = None,
    stages: Sequence[int] = STAGES,
    resume: Optional[Path] = None,
) -> Path:
    """
    Train and checkpoint the requested stages.

    Args:
        config: Validated experiment config
        out_dir: Experiment directory (ckpt/ and reports/ are created inside)
        cohort: Labeled subjects (default: load train.cohort_path)
        pool: Pretraining pool (default: load train.pool_path)
        stages: Stages to run, contiguous with the resumed checkpoint
        resume: Checkpoint of the stage preceding the first requested stage

    Returns:
        Path of the last checkpoint written
    """
    out_dir = Path(out_dir)
    train = config.train
    if cohort is None:
        cohort = load_subjects(train.cohort_path, "cohort", "train.cohort_path")
    if cohort is None:
        raise ConfigError("no cohort dataset given", "train.cohort_path")
    if pool is None and 1 in stages and train.pool_epochs > 0:
        pool = load_subjects(train.pool_path, "pool", "train.pool_path")

    stages = sorted(set(stages))
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.model_config != config.model:
            raise ConfigError("checkpoint was trained with a different model config", "resume")
        model, done = ckpt.model, ckpt.stage
        logger.info(f"Resuming from {resume} (stage {done} complete)")
    else:
        model, done = build_model(config.model, train.seed), 0
    if stages and stages[0] != done + 1:
        raise ConfigError(
            f"stage {stages[0]} needs the stage {stages[0] - 1} checkpoint (--resume)", "stage"
        )

    fit, val = training_subjects(config, cohort)
    pool_arrays = to_arrays(pool, config.model) if pool else None
    logger.info(
        f"Training on {len(fit)} subjects, validating on {len(val) if val else 0}, "
        f"pool {len(pool_arrays) if pool_arrays else 0}"
    )

    ckpt_dir = out_dir / "ckpt"
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    written: dict[int, Path] = {}

    def save(result: StageResult, trained: ConceptVAE) -> None:
        extra: dict[str, Any] = {}
        if result.pool_state is not None:
            extra["pool_state"] = result.pool_state
        written[result.stage] = save_checkpoint(
            ckpt_dir / f"stage{result.stage}.pt",
            trained,
            train.weights,
            digest,
            result.stage,
            rng_state={"seed": train.seed, "stage": result.stage, "epoch": result.epochs},
            extra=extra,
        )
        logger.info(f"Stage {result.stage} complete: checkpoint {written[result.stage]}")

    for stage in stages:
        history_path = reports_dir / f"history_stage{stage}.jsonl"
        history_path.write_text("")
        fit_schedule(
            model,
            train,
            ScheduleData(fit=fit, val=val, pool=pool_arrays),
            stages=[stage],
            on_stage_end=save,
            on_epoch=_history_writer(history_path),
        )

    if not written:
        if resume is None:
            raise ConfigError("no stage to run", "stage")
        return Path(resume)
    return written[max(written)]
