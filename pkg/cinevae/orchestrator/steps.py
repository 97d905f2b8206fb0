"""What each pipeline phase does inside an experiment directory."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..config import ExperimentConfig
from ..errors import DegenerateInputError
from ..evaluation.crossval import (
    VAE_FULL,
    VAE_PRIMARY,
    cross_validate,
    evaluate_holdout,
    format_table,
    save_report,
)
from ..interpret.decoding import concept_mean_decode, traverse_boundary
from ..interpret.figures import (
    save_frame_strip,
    save_mmode,
    save_pca_scatter,
    save_traversal,
    write_pca_csv,
)
from ..interpret.latents import collect_latents, linear_probe, pca2
from ..interpret.mmode import default_line, mmode
from ..models.experiment import ArtifactKind, Phase
from ..models.phantom import LabeledSubject
from ..network.checkpoint import load_checkpoint
from ..phantom.cohort import generate_cohort, generate_pretrain_subjects
from ..phantom.dataset_io import load_dataset, save_dataset, sidecar_path
from ..phantom.measure import septal_displacement
from ..pipeline.schedule import run_schedule
from ..utils.logging import get_logger

logger = get_logger("cinevae.orchestrator")

DATA_DIR = "data"
CKPT_DIR = "ckpt"
REPORTS_DIR = "reports"
FIGURES_DIR = "figures"
LOGS_DIR = "logs"
EXPERIMENT_DIRS = (DATA_DIR, CKPT_DIR, REPORTS_DIR, FIGURES_DIR, LOGS_DIR)

COHORT_FILE = f"{DATA_DIR}/cohort.segs"
POOL_FILE = f"{DATA_DIR}/pool.segs"

Produced = list[tuple[str, ArtifactKind]]


@dataclass
class PhaseContext:
    config: ExperimentConfig
    out_dir: Path

    def path(self, relative: str) -> Path:
        return self.out_dir / relative

    def checkpoint(self, stage: int) -> str:
        return f"{CKPT_DIR}/stage{stage}.pt"

    def cohort(self) -> list[LabeledSubject]:
        return load_dataset(self.path(COHORT_FILE))

    def pool(self) -> list[LabeledSubject]:
        return load_dataset(self.path(POOL_FILE))


def _dataset(ctx: PhaseContext, relative: str) -> Produced:
    sidecar = sidecar_path(ctx.path(relative)).relative_to(ctx.out_dir).as_posix()
    return [(relative, ArtifactKind.DATASET), (sidecar, ArtifactKind.DATASET)]


def run_generate(ctx: PhaseContext) -> Produced:
    c = ctx.config
    m = c.model
    cohort = generate_cohort(c.cohort, m.frames, c.cohort.seed, m.slices, m.height, m.width)
    save_dataset(
        cohort,
        ctx.path(COHORT_FILE),
        generator={"kind": "cohort", "spec": c.cohort.model_dump(mode="json"), "frames": m.frames},
    )
    pool = generate_pretrain_subjects(
        c.data.pool_size, m.frames, c.data.pool_seed, m.slices, m.height, m.width
    )
    save_dataset(
        pool,
        ctx.path(POOL_FILE),
        generator={"kind": "pool", "n": c.data.pool_size, "seed": c.data.pool_seed, "frames": m.frames},
    )
    return _dataset(ctx, COHORT_FILE) + _dataset(ctx, POOL_FILE)


def run_pretrain(ctx: PhaseContext) -> Produced:
    pool = ctx.pool() if ctx.config.train.pool_epochs > 0 else None
    run_schedule(ctx.config, ctx.out_dir, cohort=ctx.cohort(), pool=pool, stages=[1])
    return [
        (ctx.checkpoint(1), ArtifactKind.CHECKPOINT),
        (f"{REPORTS_DIR}/history_stage1.jsonl", ArtifactKind.REPORT),
    ]


def run_train(ctx: PhaseContext) -> Produced:
    run_schedule(
        ctx.config,
        ctx.out_dir,
        cohort=ctx.cohort(),
        stages=[2, 3],
        resume=ctx.path(ctx.checkpoint(1)),
    )
    return [
        (ctx.checkpoint(2), ArtifactKind.CHECKPOINT),
        (ctx.checkpoint(3), ArtifactKind.CHECKPOINT),
        (f"{REPORTS_DIR}/history_stage2.jsonl", ArtifactKind.REPORT),
        (f"{REPORTS_DIR}/history_stage3.jsonl", ArtifactKind.REPORT),
    ]


def run_eval(ctx: PhaseContext) -> Produced:
    config = ctx.config
    cohort = ctx.cohort()
    logger.info(f"Evaluating with the {config.evaluation.protocol} protocol")
    if config.evaluation.protocol == "holdout":
        trained = {
            VAE_PRIMARY: load_checkpoint(ctx.path(ctx.checkpoint(2))).model,
            VAE_FULL: load_checkpoint(ctx.path(ctx.checkpoint(3))).model,
        }
        report = evaluate_holdout(config, cohort, trained=trained)
    else:
        stage1 = load_checkpoint(ctx.path(ctx.checkpoint(1)))
        pool_state = stage1.extra.get("pool_state")
        pool = ctx.pool() if pool_state is None and config.train.pool_epochs > 0 else None
        report = cross_validate(config, cohort, pool=pool, pool_state=pool_state)
    report_file = f"{REPORTS_DIR}/report.json"
    table_file = f"{REPORTS_DIR}/table.txt"
    save_report(report, ctx.path(report_file))
    ctx.path(table_file).write_text(format_table(report) + "\n")
    return [(report_file, ArtifactKind.REPORT), (table_file, ArtifactKind.TABLE)]


def _group_displacement(model, cohort, slice_index: int, positive: bool) -> float | None:
    try:
        seq = concept_mean_decode(model, cohort, 0, "label", positive=positive)
        return septal_displacement(seq, slice_index)
    except DegenerateInputError:
        return None


def run_interpret(ctx: PhaseContext) -> Produced:
    config = ctx.config
    ev = config.evaluation
    model = load_checkpoint(ctx.path(ctx.checkpoint(3))).model
    cohort = ctx.cohort()
    produced: Produced = []
    summary: dict = {}

    latents = collect_latents(model, cohort)
    projection = pca2(latents)
    scatter = f"{FIGURES_DIR}/pca_scatter.png"
    coords = f"{REPORTS_DIR}/pca_coords.csv"
    save_pca_scatter(projection, latents.y, ctx.path(scatter))
    write_pca_csv(
        projection,
        latents,
        ctx.path(coords),
        subject_ids=[s.seed for s in cohort],
        concept_names=[c.name for c in config.model.concepts],
    )
    produced += [(scatter, ArtifactKind.FIGURE), (coords, ArtifactKind.TABLE)]
    summary["pca_explained_variance"] = projection.explained_variance.tolist()
    summary["pca_probe_accuracy"] = linear_probe(projection.coords, latents.y, ev.seed)

    if config.model.concepts:
        decoded = concept_mean_decode(model, cohort, 0, "label")
        if ev.mmode_line is not None:
            x0, y0, x1, y1 = ev.mmode_line
            slice_index, p0, p1 = ev.mmode_slice, (x0, y0), (x1, y1)
        else:
            slice_index, p0, p1 = default_line(decoded, ev.mmode_slice)
        mmode_file = f"{FIGURES_DIR}/concept_mean_mmode.png"
        frames_file = f"{FIGURES_DIR}/concept_mean_frames.png"
        save_mmode(mmode(decoded, slice_index, p0, p1), ctx.path(mmode_file), decoded)
        save_frame_strip(decoded, ctx.path(frames_file), slice_index)
        produced += [(mmode_file, ArtifactKind.FIGURE), (frames_file, ArtifactKind.FIGURE)]
        summary["septal_displacement"] = {
            "concept_positive": _group_displacement(model, cohort, slice_index, True),
            "concept_negative": _group_displacement(model, cohort, slice_index, False),
        }

    points = traverse_boundary(model, cohort, ev.traverse_steps, ev.traverse_span)
    traversal = f"{FIGURES_DIR}/traversal.png"
    save_traversal(points, ctx.path(traversal), ev.mmode_slice)
    produced.append((traversal, ArtifactKind.FIGURE))
    summary["traversal"] = [{"lam": p.lam, "y_hat": p.y_hat} for p in points]

    summary_file = f"{REPORTS_DIR}/interpret_summary.json"
    ctx.path(summary_file).write_text(json.dumps(_plain(summary), indent=2, sort_keys=True) + "\n")
    produced.append((summary_file, ArtifactKind.REPORT))
    return produced


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


PHASE_STEPS: dict[Phase, Callable[[PhaseContext], Produced]] = {
    Phase.GENERATE: run_generate,
    Phase.PRETRAIN: run_pretrain,
    Phase.TRAIN: run_train,
    Phase.EVAL: run_eval,
    Phase.INTERPRET: run_interpret,
}
