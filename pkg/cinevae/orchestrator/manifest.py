"""Experiment manifest: load, save, register and verify artifacts."""

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..errors import CineVAEError
from ..models.experiment import ArtifactKind, ArtifactRecord, ExperimentManifest, Phase, PhaseRecord
from ..utils.hashing import file_sha256

MANIFEST_NAME = "manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def manifest_path(out_dir: Path) -> Path:
    return Path(out_dir) / MANIFEST_NAME


def load_manifest(out_dir: Path, config_hash: str) -> ExperimentManifest:
    """Manifest of an experiment directory, or an empty one for config_hash."""
    path = manifest_path(out_dir)
    if not path.exists():
        return ExperimentManifest(config_hash=config_hash)
    try:
        return ExperimentManifest.from_json(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CineVAEError(f"unreadable manifest {path}: {e}") from e


def save_manifest(manifest: ExperimentManifest, out_dir: Path) -> Path:
    """Write manifest.json atomically (temp file + rename)."""
    path = manifest_path(out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def register_artifact(
    manifest: ExperimentManifest,
    out_dir: Path,
    relative: str,
    kind: ArtifactKind,
    phase: Phase,
    command: str,
) -> ArtifactRecord:
    """Hash a produced file and record it under its relative path."""
    record = ArtifactRecord(
        path=relative,
        kind=kind.value,
        sha256=file_sha256(Path(out_dir) / relative),
        phase=phase.value,
        created_at=utc_now(),
        command=command,
    )
    manifest.artifacts[relative] = record
    return record


def complete_phase(
    manifest: ExperimentManifest, phase: Phase, config_hash: str, artifacts: list[str]
) -> PhaseRecord:
    record = PhaseRecord(
        phase=phase.value, config_hash=config_hash, completed_at=utc_now(), artifacts=artifacts
    )
    manifest.phases[phase.value] = record
    return record


def drop_phase(manifest: ExperimentManifest, phase: Phase) -> None:
    """Forget a phase and its artifacts (before re-running it)."""
    manifest.phases.pop(phase.value, None)
    for key in [k for k, a in manifest.artifacts.items() if a.phase == phase.value]:
        del manifest.artifacts[key]


def verify_artifacts(
    manifest: ExperimentManifest, out_dir: Path, phase: Optional[Phase] = None
) -> list[str]:
    """
    Check that listed artifacts exist with their recorded hashes.

    Returns:
        One message per missing or modified file (empty when all verify)
    """
    problems = []
    records = manifest.artifacts_of(phase) if phase else list(manifest.artifacts.values())
    for record in records:
        path = Path(out_dir) / record.path
        if not path.exists():
            problems.append(f"missing: {record.path}")
        elif file_sha256(path) != record.sha256:
            problems.append(f"modified: {record.path}")
    return problems


def phase_is_current(
    manifest: ExperimentManifest, out_dir: Path, phase: Phase, config_hash: str
) -> bool:
    """Completed under config_hash with every artifact intact."""
    record = manifest.phase_record(phase)
    if record is None or record.config_hash != config_hash:
        return False
    return not verify_artifacts(manifest, out_dir, phase)
