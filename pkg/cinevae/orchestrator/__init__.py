"""Experiment orchestration: phase graph, manifest and runner."""

from .manifest import load_manifest, save_manifest, verify_artifacts
from .orchestrator import ExperimentRunner, experiment_lock, run_pipeline
from .phases import CANONICAL_ORDER, PHASE_REQUIRES, PhaseGraph, parse_phases

__all__ = [
    "load_manifest",
    "save_manifest",
    "verify_artifacts",
    "ExperimentRunner",
    "experiment_lock",
    "run_pipeline",
    "CANONICAL_ORDER",
    "PHASE_REQUIRES",
    "PhaseGraph",
    "parse_phases",
]
