#!/usr/bin/env python3
"""
cinevae - Main Entry Point

Phantom generation, three-stage VAE training, evaluation and latent-space
interpretation of cardiac cine segmentations.

Usage:
    cinevae phantom generate --n 200 --seed 0 --out data/cohort.segs
    cinevae train --config config.yaml --stage all --out experiment
    cinevae run --config config.yaml --phases all --out experiment
"""

import argparse
import json
import logging
import sys
import traceback
from collections.abc import Callable
from pathlib import Path
from typing import NoReturn, Optional

import numpy as np

from .config import ExperimentConfig, dump_config, parse_config, validate_config
from .errors import (
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    ConfigError,
    RejectedInputError,
    exit_code_for,
)
from .models.phantom import GenerativeFactors, LabeledSubject, SegSequence
from .utils.logging import get_logger, setup_logging

COMMAND_LOG = "logs/run.log"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the config/usage code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def _line(text: str) -> tuple[int, int, int, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got '{text}'")
    try:
        x0, y0, x1, y1 = (int(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"line coordinates must be integers, got '{text}'") from e
    return x0, y0, x1, y1


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with preset, environment and --out applied."""
    config = parse_config(Path(args.config) if args.config else None, preset=args.preset)
    if getattr(args, "out_dir", None):
        config = config.model_copy(update={"output_dir": str(args.out_dir)})
    return config


def _with(config: ExperimentConfig, section: str, **values) -> ExperimentConfig:
    """Copy of config with fields of one section replaced (re-validated)."""
    raw = config.model_dump(mode="json")
    raw[section].update({k: v for k, v in values.items() if v is not None})
    return validate_config(raw)


def _experiment_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir)


def _dataset_path(
    explicit: Optional[str], configured: Optional[str], fallback: Path
) -> Optional[Path]:
    for candidate in (explicit, configured):
        if candidate:
            return Path(candidate)
    return fallback if fallback.exists() else None


def _load_cohort(config: ExperimentConfig, explicit: Optional[str] = None):
    from .phantom import load_dataset

    path = _dataset_path(
        explicit, config.train.cohort_path, _experiment_dir(config) / "data" / "cohort.segs"
    )
    if path is None:
        raise ConfigError("no cohort dataset (use --data or set train.cohort_path)", "train.cohort_path")
    return load_dataset(path)


def _load_pool(config: ExperimentConfig):
    from .phantom import load_dataset

    if config.train.pool_epochs == 0:
        return None
    path = _dataset_path(None, config.train.pool_path, _experiment_dir(config) / "data" / "pool.segs")
    if path is None:
        raise ConfigError(
            f"pool_epochs={config.train.pool_epochs} needs a pretraining pool", "train.pool_path"
        )
    return load_dataset(path)


def _load_model(args: argparse.Namespace, config: ExperimentConfig, stage: int = 3):
    from .network import load_checkpoint

    path = Path(args.ckpt) if args.ckpt else _experiment_dir(config) / "ckpt" / f"stage{stage}.pt"
    return load_checkpoint(path)


# -- phantom -----------------------------------------------------------------


def cmd_phantom(args: argparse.Namespace) -> int:
    """Handle 'phantom generate' and 'phantom pretrain-pool'."""
    from .phantom import generate_cohort, generate_pretrain_subjects, save_dataset

    config = load_config(args)
    m = config.model
    frames = args.t or m.frames
    if args.phantom_command == "generate":
        spec = _with(config, "cohort", n_subjects=args.n, seed=args.seed).cohort
        subjects = generate_cohort(spec, frames, spec.seed, m.slices, m.height, m.width)
        generator = {"kind": "cohort", "spec": spec.model_dump(mode="json"), "frames": frames}
    else:
        data = _with(config, "data", pool_size=args.n, pool_seed=args.seed).data
        subjects = generate_pretrain_subjects(
            data.pool_size, frames, data.pool_seed, m.slices, m.height, m.width
        )
        generator = {"kind": "pool", "n": data.pool_size, "seed": data.pool_seed, "frames": frames}
    path = save_dataset(subjects, Path(args.out), generator=generator)

    print("\n=== Phantom Dataset ===")
    print(f"File: {path}")
    print(f"Subjects: {len(subjects)}")
    labeled = [s for s in subjects if s.is_labeled]
    if labeled:
        print(f"Responders: {sum(s.y for s in labeled)}/{len(labeled)}")
        print(f"Septal flash: {sum(s.y_sf for s in labeled)}/{len(labeled)}")
    return EXIT_OK


# -- training ----------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    """Handle 'train' subcommand."""
    from .pipeline.schedule import STAGES, run_schedule

    config = load_config(args)
    if args.seed is not None:
        config = _with(config, "train", seed=args.seed)
    out = _experiment_dir(config)
    stages = list(STAGES) if args.stage == "all" else [int(args.stage)]
    resume = Path(args.resume) if args.resume else None
    if resume is None and stages[0] > 1:
        candidate = out / "ckpt" / f"stage{stages[0] - 1}.pt"
        if candidate.exists():
            resume = candidate
    cohort = _load_cohort(config, args.data)
    pool = _load_pool(config) if 1 in stages else None

    last = run_schedule(config, out, cohort=cohort, pool=pool, stages=stages, resume=resume)

    print("\n=== Training Complete ===")
    print(f"Stages: {', '.join(str(s) for s in stages)}")
    print(f"Checkpoint: {last}")
    for stage in stages:
        print(f"History: {out / 'reports' / f'history_stage{stage}.jsonl'}")
    return EXIT_OK


def cmd_sweep_beta(args: argparse.Namespace) -> int:
    """Handle 'sweep-beta' subcommand."""
    from .pipeline import beta_sweep, format_sweep

    config = load_config(args)
    if args.seed is not None:
        config = _with(config, "train", seed=args.seed)
    betas = args.betas if args.betas is not None else config.evaluation.beta_grid
    report = beta_sweep(config, betas, _load_cohort(config, args.data), _load_pool(config))

    path = _experiment_dir(config) / "reports" / "beta_sweep.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    print()
    print(format_sweep(report))
    print(f"\nSaved: {path}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Handle 'gradcheck' subcommand."""
    from .config import preset_config
    from .pipeline import gradient_check

    config = load_config(args) if args.config else preset_config("tiny")
    result = gradient_check(config, seed=args.seed or 0)

    print("\n=== Gradient Check ===")
    print(f"Parameters checked: {result.checked}")
    print(f"Max relative error: {result.max_relative_error:.3e}")
    print(f"Worst: {result.worst_parameter}[{result.worst_index}]")
    print("PASSED" if result.passed(args.tolerance) else "FAILED")
    return EXIT_OK if result.passed(args.tolerance) else EXIT_RUNTIME


# -- evaluation --------------------------------------------------------------


def _sibling(path: Path, stage: int) -> Optional[Path]:
    candidate = path.with_name(f"stage{stage}.pt")
    return candidate if candidate.exists() else None


def cmd_eval(args: argparse.Namespace) -> int:
    """Handle 'eval' subcommand."""
    from .evaluation.crossval import (
        VAE_FULL,
        VAE_PRIMARY,
        cross_validate,
        evaluate_holdout,
        format_table,
        save_report,
    )
    from .network import load_checkpoint

    config = load_config(args)
    config = _with(
        config, "evaluation", folds=args.folds, seed=args.seed, protocol=args.protocol
    )
    cohort = _load_cohort(config, args.data)
    methods = args.methods.split(",") if args.methods else None
    kwargs = {"methods": methods} if methods else {}

    ckpt_path = Path(args.ckpt) if args.ckpt else None
    pool_state = None
    if ckpt_path is not None:
        ckpt = load_checkpoint(ckpt_path)
        if ckpt.model_config != config.model:
            raise ConfigError("checkpoint was trained with a different model config", "ckpt")
        stage1 = ckpt if ckpt.stage == 1 else None
        if stage1 is None and _sibling(ckpt_path, 1):
            stage1 = load_checkpoint(_sibling(ckpt_path, 1))
        if stage1 is not None:
            pool_state = stage1.extra.get("pool_state")
    needs_pool = pool_state is None

    if config.evaluation.protocol == "holdout":
        trained = {}
        if ckpt_path is not None and ckpt.stage >= 2:
            trained[VAE_PRIMARY if ckpt.stage == 2 else VAE_FULL] = ckpt.model
            if ckpt.stage == 3 and _sibling(ckpt_path, 2):
                trained[VAE_PRIMARY] = load_checkpoint(_sibling(ckpt_path, 2)).model
        pool = _load_pool(config) if needs_pool and len(trained) < 2 else None
        report = evaluate_holdout(
            config, cohort, trained=trained, pool=pool, pool_state=pool_state, **kwargs
        )
    else:
        pool = _load_pool(config) if needs_pool else None
        report = cross_validate(config, cohort, pool=pool, pool_state=pool_state, **kwargs)

    out = Path(args.out) if args.out else _experiment_dir(config) / "reports" / "report.json"
    save_report(report, out)
    print()
    print(format_table(report))
    print(f"\nSaved: {out}")
    return EXIT_OK


# -- interpretation ----------------------------------------------------------


def _concept_index(config: ExperimentConfig, concept: str) -> int:
    names = [c.name for c in config.model.concepts]
    if concept in names:
        return names.index(concept)
    if concept.isdigit() and int(concept) < len(names):
        return int(concept)
    raise RejectedInputError(f"unknown concept '{concept}' (model has {names})")


def _as_subject(seq: SegSequence) -> LabeledSubject:
    return LabeledSubject(
        sequence=seq, y=None, y_k=[], factors=GenerativeFactors(0, 0, 0, 0, 0, 0), seed=0
    )


def cmd_interpret(args: argparse.Namespace) -> int:
    """Handle 'interpret' subcommands."""
    from .interpret import (
        collect_latents,
        concept_mean_decode,
        default_line,
        linear_probe,
        mmode,
        pca2,
        traverse_boundary,
        traverse_remainder,
    )
    from .interpret.figures import (
        save_frame_strip,
        save_mmode,
        save_pca_scatter,
        save_sequence_gif,
        save_traversal,
        write_pca_csv,
    )
    from .phantom import load_dataset, save_dataset

    config = load_config(args)
    ev = config.evaluation
    which = args.interpret_command

    if which == "mmode":
        subjects = load_dataset(Path(args.data))
        if not 0 <= args.subject < len(subjects):
            raise RejectedInputError(f"subject {args.subject} out of range (n={len(subjects)})")
        seq = subjects[args.subject].sequence
        if args.line is not None:
            x0, y0, x1, y1 = args.line
            slice_index, p0, p1 = args.slice, (x0, y0), (x1, y1)
        else:
            slice_index, p0, p1 = default_line(seq, args.slice)
        out = save_mmode(mmode(seq, slice_index, p0, p1), Path(args.out), seq)
        print("\n=== M-mode ===")
        print(f"Line: {p0} -> {p1} on slice {slice_index}")
        print(f"Saved: {out}")
        return EXIT_OK

    model = _load_model(args, config).model
    cohort = _load_cohort(config, args.data)

    if which == "pca":
        latents = collect_latents(model, cohort)
        projection = pca2(latents)
        png = Path(args.out)
        csv_path = png.with_suffix(".csv")
        save_pca_scatter(projection, latents.y, png)
        write_pca_csv(
            projection,
            latents,
            csv_path,
            subject_ids=[s.seed for s in cohort],
            concept_names=[c.name for c in config.model.concepts],
        )
        print("\n=== Latent PCA ===")
        ratio = projection.explained_variance
        print(f"Explained variance: PC1 {100 * ratio[0]:.1f}%, PC2 {100 * ratio[1]:.1f}%")
        print(f"Linear probe accuracy: {linear_probe(projection.coords, latents.y, ev.seed):.3f}")
        print(f"Saved: {png}, {csv_path}")

    elif which == "concept-mean":
        k = _concept_index(config, args.concept)
        positive = not args.negative
        target = Path(args.out)
        if args.soft:
            probs = concept_mean_decode(
                model, cohort, k, args.selector, positive=positive, soft=True
            )
            np.save(target.with_suffix(".npy"), probs)
            print(f"\nSaved: {target.with_suffix('.npy')}")
            return EXIT_OK
        seq = concept_mean_decode(model, cohort, k, args.selector, positive=positive)
        save_dataset([_as_subject(seq)], target, generator={"kind": "concept-mean", "concept": k})
        if ev.mmode_line is not None:
            x0, y0, x1, y1 = ev.mmode_line
            slice_index, p0, p1 = ev.mmode_slice, (x0, y0), (x1, y1)
        else:
            slice_index, p0, p1 = default_line(seq, ev.mmode_slice)
        written = [
            target,
            save_mmode(mmode(seq, slice_index, p0, p1), target.with_suffix(".mmode.png"), seq),
            save_frame_strip(seq, target.with_suffix(".frames.png"), slice_index),
        ]
        if args.gif:
            written.append(save_sequence_gif(seq, target.with_suffix(".gif"), slice_index))
        print("\n=== Concept-mean Decoding ===")
        print(f"Concept: {config.model.concepts[k].name} ({args.selector}, positive={positive})")
        for path in written:
            print(f"Saved: {path}")

    elif which in ("traverse", "remainder"):
        steps = args.steps or ev.traverse_steps
        span = ev.traverse_span if args.span is None else args.span
        if which == "traverse":
            points = traverse_boundary(model, cohort, steps, span)
        else:
            points = traverse_remainder(model, cohort, args.dim, steps, span)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        png = save_traversal(points, out_dir / f"{which}.png", ev.mmode_slice)
        summary = out_dir / f"{which}.json"
        summary.write_text(
            json.dumps([{"lam": p.lam, "y_hat": p.y_hat} for p in points], indent=2) + "\n"
        )
        print(f"\n=== {'Boundary' if which == 'traverse' else 'Remainder'} Traversal ===")
        for p in points:
            print(f"  lam={p.lam:+.2f}  y_hat={p.y_hat:.3f}")
        print(f"Saved: {png}, {summary}")
    return EXIT_OK


# -- orchestration -----------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    """Handle 'run' subcommand."""
    from .orchestrator import parse_phases, run_pipeline

    config = load_config(args)
    if args.seed is not None:
        config = _with(config, "train", seed=args.seed)
    try:
        phases = parse_phases(args.phases.split(","))
    except ValueError as e:
        raise ConfigError(str(e), "phases") from e
    if not phases:
        raise ConfigError("no phase requested", "phases")
    manifest = run_pipeline(
        config, _experiment_dir(config), phases, force=args.force, command=" ".join(sys.argv)
    )

    print("\n=== Pipeline ===")
    print(f"Experiment: {config.output_dir}")
    print(f"Config hash: {manifest.config_hash[:12]}")
    for name, record in sorted(manifest.phases.items()):
        print(f"  {name}: {len(record.artifacts)} artifacts ({record.completed_at})")
    return EXIT_OK


def cmd_describe(args: argparse.Namespace) -> int:
    """Handle 'describe' subcommand."""
    from .network import build_model, describe_model, load_checkpoint

    config = load_config(args)
    if args.ckpt:
        ckpt = load_checkpoint(Path(args.ckpt))
        model = ckpt.model
        print(f"=== Checkpoint ===\nStage: {ckpt.stage}\nConfig hash: {ckpt.config_hash}\n")
    else:
        model = build_model(config.model, config.train.seed)
        print("=== Config ===")
        print(dump_config(config))
    print(describe_model(model))
    return EXIT_OK


def cmd_init(args: argparse.Namespace) -> int:
    """Handle 'init' subcommand."""
    from .cli import init_experiment

    target = Path(args.path) if args.path else Path.cwd()
    return EXIT_OK if init_experiment(target, args.preset or "default") else EXIT_USAGE


# -- parser ------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser, out_help: str = "Output path") -> None:
    parser.add_argument("--config", type=str, help="Experiment config (YAML)")
    parser.add_argument("--preset", type=str, help="Named preset applied under the config file")
    parser.add_argument("--seed", type=int, help="Seed override")
    parser.add_argument("--out", type=str, help=out_help)
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")


def _experiment_common(parser: argparse.ArgumentParser) -> None:
    _common(parser, "Experiment directory (default: output_dir from the config)")
    parser.set_defaults(out_is_dir=True)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        prog="cinevae",
        description="Interpretable VAE classification of cardiac cine segmentations",
    )
    subparsers = parser.add_subparsers(dest="command", help="Commands", parser_class=CliParser)

    # phantom
    phantom = subparsers.add_parser("phantom", help="Generate synthetic cine segmentations")
    phantom_sub = phantom.add_subparsers(
        dest="phantom_command", required=True, parser_class=CliParser
    )
    for name, helptext in (
        ("generate", "Labeled cohort"),
        ("pretrain-pool", "Unlabeled pretraining pool"),
    ):
        p = phantom_sub.add_parser(name, help=helptext)
        _common(p, "Dataset file (.segs)")
        p.add_argument("--n", type=int, help="Number of subjects")
        p.add_argument("--t", type=int, help="Frames per cycle (default: model.frames)")
        p.set_defaults(handler=cmd_phantom, out_required=True)

    # train
    train = subparsers.add_parser("train", help="Run training stages")
    _experiment_common(train)
    train.add_argument("--stage", choices=["1", "2", "3", "all"], default="all")
    train.add_argument("--resume", type=str, help="Checkpoint of the preceding stage")
    train.add_argument("--data", type=str, help="Cohort dataset (default: train.cohort_path)")
    train.set_defaults(handler=cmd_train)

    # sweep-beta
    sweep = subparsers.add_parser("sweep-beta", help="Reduced-epoch sweep over the KL weight")
    _experiment_common(sweep)
    sweep.add_argument("--betas", type=_floats, help="Comma-separated betas (default: beta_grid)")
    sweep.add_argument("--data", type=str, help="Cohort dataset")
    sweep.set_defaults(handler=cmd_sweep_beta)

    # gradcheck
    grad = subparsers.add_parser("gradcheck", help="Finite-difference check of the joint loss")
    _common(grad)
    grad.add_argument("--tolerance", type=float, default=1e-4)
    grad.set_defaults(handler=cmd_gradcheck)

    # eval
    ev = subparsers.add_parser("eval", help="Compare baseline, VAE+primary and full model")
    _common(ev, "Report file (default: <experiment>/reports/report.json)")
    ev.add_argument("--ckpt", type=str, help="Trained checkpoint (stage 1, 2 or 3)")
    ev.add_argument("--data", type=str, help="Labeled cohort dataset")
    ev.add_argument("--folds", type=int, help="Number of folds")
    ev.add_argument("--protocol", choices=["kfold", "holdout"])
    ev.add_argument("--methods", type=str, help="Comma-separated subset of methods")
    ev.add_argument("--experiment", type=str, dest="out_dir", help="Experiment directory")
    ev.set_defaults(handler=cmd_eval)

    # interpret
    interp = subparsers.add_parser("interpret", help="Latent-space interpretation")
    interp_sub = interp.add_subparsers(
        dest="interpret_command", required=True, parser_class=CliParser
    )
    for name, helptext in (
        ("pca", "PCA scatter and coordinates"),
        ("concept-mean", "Decode the mean latent sequence of a concept group"),
        ("traverse", "Walk the primary decision direction"),
        ("remainder", "Sweep one latent coordinate of the reserved remainder"),
        ("mmode", "M-mode image of a stored sequence"),
    ):
        p = interp_sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--ckpt", type=str, help="Checkpoint (default: <experiment>/ckpt/stage3.pt)")
        p.add_argument("--data", type=str, help="Dataset file")
        p.add_argument("--experiment", type=str, dest="out_dir", help="Experiment directory")
        p.set_defaults(handler=cmd_interpret, out_required=True)
    concept = interp_sub.choices["concept-mean"]
    concept.add_argument("--concept", type=str, default="SF", help="Concept name or index")
    concept.add_argument("--selector", choices=["label", "prediction"], default="label")
    concept.add_argument("--negative", action="store_true", help="Decode the concept-negative group")
    concept.add_argument("--soft", action="store_true", help="Save mean class probabilities (.npy)")
    concept.add_argument("--gif", action="store_true", help="Also write an animated GIF")
    for name in ("traverse", "remainder"):
        interp_sub.choices[name].add_argument("--steps", type=int)
        interp_sub.choices[name].add_argument("--span", type=float)
    interp_sub.choices["remainder"].add_argument("--dim", type=int, required=True)
    mm = interp_sub.choices["mmode"]
    mm.add_argument("--subject", type=int, default=0)
    mm.add_argument("--slice", type=int, default=1)
    mm.add_argument("--line", type=_line, help="x0,y0,x1,y1 (default: through LV and RV)")

    # run
    run = subparsers.add_parser("run", help="Run pipeline phases with artifact tracking")
    _experiment_common(run)
    run.add_argument("--phases", type=str, default="all", help="Comma-separated phases or 'all'")
    run.add_argument("--force", action="store_true", help="Re-run phases that are up to date")
    run.set_defaults(handler=cmd_run)

    # describe
    desc = subparsers.add_parser("describe", help="Print config and parameter counts")
    _common(desc)
    desc.add_argument("--ckpt", type=str, help="Describe a checkpoint instead")
    desc.set_defaults(handler=cmd_describe)

    # init
    init = subparsers.add_parser("init", help="Create an experiment directory skeleton")
    init.add_argument("path", nargs="?", help="Target directory (default: current directory)")
    init.add_argument("--preset", type=str, help="Preset written to config.yaml")
    init.set_defaults(handler=cmd_init)

    return parser


def _normalize(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if getattr(args, "out_is_dir", False) and args.out:
        args.out_dir = args.out
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command}: --out is required")
    for name in ("config", "preset", "seed", "out", "out_dir", "ckpt", "debug"):
        if not hasattr(args, name):
            setattr(args, name, None)


def dispatch(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a handler, mapping exceptions to the stable exit codes."""
    logger = get_logger()
    try:
        return handler(args)
    except Exception as e:
        logger.error(f"{type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())
        return exit_code_for(e)


def main(argv: Optional[list[str]] = None) -> NoReturn:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        # No subcommand - show help
        parser.print_help()
        sys.exit(EXIT_OK)
    _normalize(args, parser)

    log_file = None
    if getattr(args, "out_is_dir", False) and args.out_dir:
        log_file = Path(args.out_dir) / COMMAND_LOG
    setup_logging(level=logging.DEBUG if args.debug else logging.INFO, log_file=log_file)
    sys.exit(dispatch(args.handler, args))


if __name__ == "__main__":
    main()
