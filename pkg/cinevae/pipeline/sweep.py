"""Grid search over the KL weight beta."""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from ..config import ExperimentConfig, TrainConfig
from ..errors import RejectedInputError
from ..models.phantom import LabeledSubject
from ..network.checkpoint import build_model
from ..utils.logging import get_logger
from .data import to_arrays
from .inference import predict
from .schedule import ScheduleData, fit_schedule, training_subjects
from .stages import half_threshold_bacc

logger = get_logger("cinevae.pipeline")

DICE_TOLERANCE = 0.02


@dataclass
class SweepRow:
    beta: float
    dice: float
    kl_per_dim: float
    concept_bacc: list[Optional[float]] = field(default_factory=list)
    primary_bacc: Optional[float] = None


@dataclass
class SweepReport:
    rows: list[SweepRow]
    recommended_beta: float
    epochs: tuple[int, int, int]
    pool_epochs: int

    def to_json(self) -> dict[str, Any]:
        return {
            "rows": [asdict(r) for r in self.rows],
            "recommended_beta": self.recommended_beta,
            "epochs": list(self.epochs),
            "pool_epochs": self.pool_epochs,
        }


def scale_epochs(epochs: int, scale: float) -> int:
    """Reduced epoch count; a nonzero count never drops to zero."""
    return max(1, round(epochs * scale)) if epochs > 0 else 0


def sweep_train_config(train: TrainConfig, beta: float, scale: float) -> TrainConfig:
    """Copy of a training config at reduced epochs with beta replaced."""
    weights = train.weights.model_copy(update={"beta": float(beta)})
    return train.model_copy(
        update={
            "stage_epochs": tuple(scale_epochs(e, scale) for e in train.stage_epochs),
            "pool_epochs": scale_epochs(train.pool_epochs, scale),
            "weights": weights,
        }
    )


def kl_per_dimension(mu: np.ndarray, log_sigma: np.ndarray) -> float:
    """KL to the unit Gaussian averaged over subjects, frames and latent dimensions."""
    kl = 0.5 * (mu**2 + np.exp(2 * log_sigma) - 1 - 2 * log_sigma)
    return float(kl.mean())


def recommend_beta(rows: Sequence[SweepRow], tolerance: float = DICE_TOLERANCE) -> float:
    """Largest beta whose Dice is within tolerance of the best Dice in the sweep."""
    best = max(r.dice for r in rows)
    return max(r.beta for r in rows if r.dice >= best - tolerance)


def beta_sweep(
    config: ExperimentConfig,
    betas: Sequence[float],
    cohort: Sequence[LabeledSubject],
    pool: Optional[Sequence[LabeledSubject]] = None,
) -> SweepReport:
    """
    Train the full schedule once per beta at reduced epochs and score each run.

    Each run starts from the same initial weights and sees the same batches;
    only beta differs. Scores come from the validation split of the training
    portion (the fitted subjects when the split is empty).

    Raises:
        RejectedInputError: betas empty or negative
    """
    if not betas:
        raise RejectedInputError("beta sweep needs at least one beta")
    if any(b < 0 for b in betas):
        raise RejectedInputError(f"betas must be >= 0, got {list(betas)}")

    fit, val = training_subjects(config, cohort)
    scored = val if val is not None else fit
    pool_arrays = to_arrays(pool, config.model) if pool else None
    scale = config.evaluation.sweep_epoch_scale

    rows: list[SweepRow] = []
    train = config.train
    for beta in betas:
        train = sweep_train_config(config.train, beta, scale)
        logger.info(f"Beta sweep: beta={beta} epochs={train.stage_epochs} pool={train.pool_epochs}")
        model = build_model(config.model, train.seed)
        data = ScheduleData(fit=fit, val=None, pool=pool_arrays if train.pool_epochs else None)
        fit_schedule(model, train, data)
        preds = predict(model, scored, train.batch_size)
        row = SweepRow(
            beta=float(beta),
            dice=float(np.mean(preds.dice)),
            kl_per_dim=kl_per_dimension(preds.mu, preds.log_sigma),
            concept_bacc=[
                half_threshold_bacc(scored.y_k[:, k], preds.y_k_hat[:, k])
                for k in range(scored.y_k.shape[1])
            ],
            primary_bacc=half_threshold_bacc(scored.y, preds.y_hat),
        )
        logger.info(f"Beta sweep: beta={beta} dice={row.dice:.4f} kl/dim={row.kl_per_dim:.4f}")
        rows.append(row)

    recommended = recommend_beta(rows)
    logger.info(f"Beta sweep recommends beta={recommended}")
    return SweepReport(
        rows=rows,
        recommended_beta=recommended,
        epochs=train.stage_epochs,
        pool_epochs=train.pool_epochs,
    )


def format_sweep(report: SweepReport) -> str:
    lines = ["=== Beta Sweep ===", f"{'beta':>8} {'dice':>8} {'kl/dim':>8} {'primary':>8} concepts"]
    for r in report.rows:
        primary = f"{r.primary_bacc:.4f}" if r.primary_bacc is not None else "-"
        concepts = " ".join(f"{c:.4f}" if c is not None else "-" for c in r.concept_bacc)
        lines.append(f"{r.beta:>8g} {r.dice:>8.4f} {r.kl_per_dim:>8.4f} {primary:>8} {concepts}")
    lines.append("")
    lines.append(f"Recommended beta: {report.recommended_beta:g}")
    return "\n".join(lines)
