"""Method comparison: baseline, VAE + primary head, VAE + primary + concept heads.

Every method is scored on subjects it never trained on. Operating thresholds
come from the training side (Youden on the validation split) and are applied
frozen to the test subjects; the pooled-test Youden point is reported next to
them.
"""

import copy
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch

from ..config import ExperimentConfig
from ..errors import ConfigError, DegenerateInputError
from ..models.metrics import FoldAssignment, MethodMetrics, MetricsReport, RateTriple
from ..models.phantom import LabeledSubject
from ..network.checkpoint import build_model
from ..network.vae import ConceptVAE
from ..pipeline.data import SubjectArrays, holdout_split, to_arrays, validation_split
from ..pipeline.inference import predict
from ..pipeline.schedule import ScheduleData, fit_schedule
from ..pipeline.stages import StagePhase, train_baseline, train_stage
from ..utils.logging import get_logger
from .folds import stratified_kfold
from .metrics import apply_threshold, confusion, roc, youden
from .stats import mcnemar

logger = get_logger("cinevae.evaluation")

BASELINE = "baseline"
VAE_PRIMARY = "vae_primary"
VAE_FULL = "vae_primary_concept"
METHODS = (BASELINE, VAE_PRIMARY, VAE_FULL)
DEFAULT_THRESHOLD = 0.5


@dataclass
class MethodOutcome:
    """Test-side scores of one method on one fold, with its frozen thresholds."""
    scores: np.ndarray
    threshold: float
    dice: Optional[np.ndarray] = None
    concept_scores: Optional[np.ndarray] = None
    concept_thresholds: list[float] = field(default_factory=list)


@dataclass
class FoldOutcome:
    fold: int
    test_indices: np.ndarray
    methods: dict[str, MethodOutcome] = field(default_factory=dict)


def select_threshold(labels: np.ndarray, scores: np.ndarray) -> float:
    """Youden threshold on training-side predictions (0.5 when one class is missing)."""
    y = np.asarray(labels)
    known = y >= 0
    if not np.any(known) or len(np.unique(y[known])) < 2:
        logger.warning("Validation split lacks a class; using threshold 0.5")
        return DEFAULT_THRESHOLD
    return youden(roc(y[known], np.asarray(scores)[known])).threshold


def fit_validation(
    arrays: SubjectArrays, config: ExperimentConfig
) -> tuple[SubjectArrays, SubjectArrays, Optional[SubjectArrays]]:
    """(fit, threshold source, val) for a training portion."""
    fit_idx, val_idx = validation_split(arrays, config.train)
    fit = arrays.subset(fit_idx)
    val = arrays.subset(val_idx) if len(val_idx) else None
    return fit, (val if val is not None else fit), val


def pretrain_pool_state(
    config: ExperimentConfig, pool: Optional[Sequence[LabeledSubject]]
) -> dict[str, torch.Tensor]:
    """Weights after the pool epochs of stage 1; the pool never contains cohort subjects."""
    train = config.train
    model = build_model(config.model, train.seed)
    if train.pool_epochs > 0:
        if not pool:
            raise ConfigError(
                f"pool_epochs={train.pool_epochs} needs a pretraining pool", "train.pool_path"
            )
        train_stage(
            model, to_arrays(pool, config.model), 1, train, train.pool_epochs, StagePhase.POOL
        )
    return copy.deepcopy(model.state_dict())


def _score(
    model: ConceptVAE,
    threshold_source: SubjectArrays,
    test: SubjectArrays,
    batch_size: int,
    with_dice: bool,
    with_concepts: bool,
) -> MethodOutcome:
    fitted = predict(model, threshold_source, batch_size, with_dice=False)
    tested = predict(model, test, batch_size, with_dice=with_dice)
    outcome = MethodOutcome(
        scores=tested.y_hat,
        threshold=select_threshold(threshold_source.y, fitted.y_hat),
        dice=tested.dice,
    )
    if with_concepts:
        outcome.concept_scores = tested.y_k_hat
        outcome.concept_thresholds = [
            select_threshold(threshold_source.y_k[:, k], fitted.y_k_hat[:, k])
            for k in range(tested.y_k_hat.shape[1])
        ]
    return outcome


def _train_baseline(config: ExperimentConfig, fit: SubjectArrays) -> ConceptVAE:
    epochs = config.train.stage_epochs[1] + config.train.stage_epochs[2]
    model = build_model(config.model, config.train.seed)
    train_baseline(model, fit, config.train, epochs)
    return model


def _evaluate_split(
    config: ExperimentConfig,
    train_part: SubjectArrays,
    test: SubjectArrays,
    methods: Sequence[str],
    pool_state: Optional[dict[str, torch.Tensor]],
    trained: Optional[Mapping[str, ConceptVAE]] = None,
) -> dict[str, MethodOutcome]:
    fit, source, val = fit_validation(train_part, config)
    batch_size = config.train.batch_size
    trained = trained or {}
    outcomes: dict[str, MethodOutcome] = {}

    if BASELINE in methods:
        model = _train_baseline(config, fit)
        outcomes[BASELINE] = _score(model, source, test, batch_size, False, False)

    vae_methods = [m for m in (VAE_PRIMARY, VAE_FULL) if m in methods]
    if all(m in trained for m in vae_methods):
        for method in vae_methods:
            outcomes[method] = _score(
                trained[method], source, test, batch_size, True, method == VAE_FULL
            )
        return outcomes

    if vae_methods:
        model = build_model(config.model, config.train.seed)
        data = ScheduleData(fit=fit, val=val)
        fit_schedule(model, config.train, data, stages=(1, 2), pool_state=pool_state)
        if VAE_PRIMARY in methods:
            outcomes[VAE_PRIMARY] = _score(model, source, test, batch_size, True, False)
        if VAE_FULL in methods:
            fit_schedule(model, config.train, data, stages=(3,))
            outcomes[VAE_FULL] = _score(model, source, test, batch_size, True, True)
    return outcomes


def _check_methods(methods: Sequence[str]) -> list[str]:
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise ConfigError(
            f"methods must be a nonempty subset of {list(METHODS)}, got {list(methods)}", "methods"
        )
    return [m for m in METHODS if m in methods]


def cross_validate(
    config: ExperimentConfig,
    cohort: Sequence[LabeledSubject],
    methods: Sequence[str] = METHODS,
    pool: Optional[Sequence[LabeledSubject]] = None,
    pool_state: Optional[dict[str, torch.Tensor]] = None,
) -> MetricsReport:
    """
    Stratified k-fold comparison of the methods.

    Per fold every method trains from scratch on the training folds (the VAE
    methods start from the pool-pretrained weights), picks its threshold on
    the training-side validation split and predicts the held-out fold.

    Args:
        config: Experiment config (evaluation.folds and evaluation.seed drive the split)
        cohort: Labeled subjects
        methods: Subset of METHODS
        pool: Pretraining pool, needed when train.pool_epochs > 0 and no pool_state is given
        pool_state: Weights after the pool epochs (from a stage-1 checkpoint)

    Returns:
        MetricsReport with one row per method
    """
    methods = _check_methods(methods)
    arrays = to_arrays(cohort, config.model)
    if not arrays.has_primary_labels:
        raise ConfigError("cross-validation needs a primary label for every subject", "data")
    k = config.evaluation.folds
    folds = stratified_kfold(arrays.y, k, config.evaluation.seed)
    if pool_state is None and any(m != BASELINE for m in methods):
        pool_state = pretrain_pool_state(config, pool)

    outcomes = []
    for fold in range(k):
        test_idx = folds.test_indices(fold)
        train_idx = folds.train_indices(fold)
        logger.info(f"Fold {fold + 1}/{k}: {len(train_idx)} train, {len(test_idx)} test")
        per_method = _evaluate_split(
            config,
            arrays.subset(train_idx),
            arrays.subset(test_idx),
            methods,
            pool_state,
        )
        outcomes.append(FoldOutcome(fold=fold, test_indices=test_idx, methods=per_method))
    return build_report(config, arrays, outcomes, methods, protocol="kfold", folds=folds)


def evaluate_holdout(
    config: ExperimentConfig,
    cohort: Sequence[LabeledSubject],
    trained: Optional[Mapping[str, ConceptVAE]] = None,
    methods: Sequence[str] = METHODS,
    pool: Optional[Sequence[LabeledSubject]] = None,
    pool_state: Optional[dict[str, torch.Tensor]] = None,
) -> MetricsReport:
    """
    Single stratified train/test split.

    trained maps VAE method names to models fitted on the training portion of
    this same split (the stage-2 and stage-3 checkpoints of the schedule);
    only the baseline is trained here then. Missing models are trained.
    """
    methods = _check_methods(methods)
    arrays = to_arrays(cohort, config.model)
    if not arrays.has_primary_labels:
        raise ConfigError("holdout evaluation needs a primary label for every subject", "data")
    train_idx, test_idx = holdout_split(arrays, config.evaluation)
    logger.info(f"Holdout: {len(train_idx)} train, {len(test_idx)} test")
    trained = dict(trained or {})
    needs_training = any(m != BASELINE and m not in trained for m in methods)
    if needs_training and pool_state is None:
        pool_state = pretrain_pool_state(config, pool)
    per_method = _evaluate_split(
        config, arrays.subset(train_idx), arrays.subset(test_idx), methods, pool_state, trained
    )
    outcome = FoldOutcome(fold=0, test_indices=test_idx, methods=per_method)
    return build_report(config, arrays, [outcome], methods, protocol="holdout", folds=None)


def _finite_mean(values: Sequence[float]) -> Optional[float]:
    finite = [v for v in values if np.isfinite(v)]
    return float(np.mean(finite)) if finite else None


def _pooled_youden(labels: np.ndarray, scores: np.ndarray) -> Optional[RateTriple]:
    try:
        point = youden(roc(labels, scores))
    except DegenerateInputError:
        return None
    return RateTriple.from_rates(point.sensitivity, point.specificity)


def _rates(
    labels: np.ndarray, scores: list[np.ndarray], thresholds: list[float], groups: list[np.ndarray]
) -> tuple[np.ndarray, RateTriple, RateTriple]:
    """Frozen-threshold predictions, pooled rates and per-fold mean rates."""
    preds = np.concatenate([apply_threshold(s, t) for s, t in zip(scores, thresholds)])
    pooled = confusion(labels, preds)
    per_fold = [confusion(labels[g], preds[g]) for g in groups]
    mean = RateTriple.from_rates(
        float(np.mean([c.sensitivity for c in per_fold])),
        float(np.mean([c.specificity for c in per_fold])),
    )
    return preds, RateTriple.from_rates(pooled.sensitivity, pooled.specificity), mean


def _concept_summary(
    config: ExperimentConfig,
    arrays: SubjectArrays,
    outcomes: list[FoldOutcome],
    method: str,
    order: np.ndarray,
) -> Optional[dict[str, Any]]:
    summaries = []
    for k, spec in enumerate(config.model.concepts):
        labels = arrays.y_k[order, k]
        parts = [o.methods[method] for o in outcomes]
        scores = np.concatenate([p.concept_scores[:, k] for p in parts])
        preds = np.concatenate(
            [apply_threshold(p.concept_scores[:, k], p.concept_thresholds[k]) for p in parts]
        )
        known = labels >= 0
        if not np.any(known):
            continue
        counts = confusion(labels[known], preds[known])
        rates = RateTriple.from_rates(counts.sensitivity, counts.specificity)
        pooled = _pooled_youden(labels[known], scores[known])
        summaries.append(
            {
                "name": spec.name,
                "bacc": rates.bacc,
                "sen": rates.sen,
                "spe": rates.spe,
                "pooled_youden": None if pooled is None else vars(pooled),
            }
        )
    if not summaries:
        return None
    concept = dict(summaries[0])
    if len(summaries) > 1:
        concept["all"] = summaries
    return concept


def build_report(
    config: ExperimentConfig,
    arrays: SubjectArrays,
    outcomes: list[FoldOutcome],
    methods: Sequence[str],
    protocol: str,
    folds: Optional[FoldAssignment],
) -> MetricsReport:
    """Assemble fold outcomes (merged in fold order) into a MetricsReport."""
    outcomes = sorted(outcomes, key=lambda o: o.fold)
    order = np.concatenate([o.test_indices for o in outcomes])
    labels = arrays.y[order]
    offsets = np.cumsum([0] + [len(o.test_indices) for o in outcomes])
    groups = [np.arange(offsets[i], offsets[i + 1]) for i in range(len(outcomes))]

    report = MetricsReport(
        protocol=protocol,
        folds=folds.k if folds is not None else 1,
        seed=config.evaluation.seed,
        n_subjects=len(arrays),
    )
    predictions: dict[str, np.ndarray] = {}
    for method in methods:
        scores = [o.methods[method].scores for o in outcomes]
        thresholds = [o.methods[method].threshold for o in outcomes]
        preds, pooled, per_fold = _rates(labels, scores, thresholds, groups)
        predictions[method] = preds
        dice_parts = [o.methods[method].dice for o in outcomes]
        dice = None
        if all(d is not None for d in dice_parts):
            dice = round(100 * float(np.mean(np.concatenate(dice_parts))), 2)
        row = MethodMetrics(
            method=method,
            bacc=pooled.bacc,
            sen=pooled.sen,
            spe=pooled.spe,
            dice=dice,
            threshold=_finite_mean(thresholds),
            pooled_youden=_pooled_youden(labels, np.concatenate(scores)),
            per_fold_mean=per_fold,
        )
        if method != BASELINE and BASELINE in predictions:
            row.mcnemar_p_vs_baseline = mcnemar(preds, predictions[BASELINE], labels)
        if method == VAE_FULL:
            row.concept = _concept_summary(config, arrays, outcomes, method, order)
        report.methods.append(row)
        logger.info(f"{method}: BACC={row.bacc:.2f} SEN={row.sen:.2f} SPE={row.spe:.2f}")
    return report


def save_report(report: MetricsReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return path


def _cell(value: Optional[float], fmt: str = ".2f") -> str:
    return "-" if value is None else format(value, fmt)


def format_table(report: MetricsReport) -> str:
    """Text table: one row per method, primary rates then concept rates."""
    title = f"=== Results ({report.protocol}"
    title += f", {report.folds} folds" if report.protocol == "kfold" else ""
    title += f", n={report.n_subjects}) ==="
    header = (
        f"{'Method':<22}{'BACC':>8}{'SEN':>8}{'SPE':>8}{'Dice':>8}{'p':>8}"
        f" | {'Concept':<8}{'BACC':>8}{'SEN':>8}{'SPE':>8}"
    )
    lines = [title, header, "-" * len(header)]
    for row in report.methods:
        concept = row.concept or {}
        lines.append(
            f"{row.method:<22}{row.bacc:>8.2f}{row.sen:>8.2f}{row.spe:>8.2f}"
            f"{_cell(row.dice):>8}{_cell(row.mcnemar_p_vs_baseline, '.3f'):>8}"
            f" | {concept.get('name', '-'):<8}{_cell(concept.get('bacc')):>8}"
            f"{_cell(concept.get('sen')):>8}{_cell(concept.get('spe')):>8}"
        )
    lines.append("")
    lines.append("Pooled test Youden (BACC/SEN/SPE):")
    for row in report.methods:
        if row.pooled_youden is not None:
            y = row.pooled_youden
            lines.append(f"  {row.method}: {y.bacc:.2f} / {y.sen:.2f} / {y.spe:.2f}")
    if report.protocol == "kfold":
        lines.append("Per-fold mean (BACC/SEN/SPE):")
        for row in report.methods:
            if row.per_fold_mean is not None:
                m = row.per_fold_mean
                lines.append(f"  {row.method}: {m.bacc:.2f} / {m.sen:.2f} / {m.spe:.2f}")
    return "\n".join(lines)
